"""End-to-end run execution and sweep campaigns.

A run spawns (or simulates) an inference runner, ingests the meter stream
and the runner's event stream concurrently, polls the runner process
tree's memory, and assembles everything into a RunRecord whose metrics are
recomputable from the stored evidence alone.

Two execution engines share the same assembly path:

* **virtual** — synthetic runner + simulated/replayed meter on a virtual
  clock. No subprocess, no sleeping, bit-for-bit deterministic. This is
  what tests and desk-scale campaigns use.
* **subprocess** — a real runner child process on the wall clock, with
  three concurrent readers (meter sampler, stdout event reader, memory
  poller), each appending to its own buffer.

Campaign-level execution is strictly serial with a cooling interval
between consecutive runs, so measurements never interfere.
"""

from __future__ import annotations

import itertools
import random
import subprocess
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import psutil

from .errors import (
    EdgebenchError,
    ManifestError,
    MeterFailure,
    NoSamplesInPhase,
    RunnerFailure,
    RunTimeout,
)
from .metrics import (
    MemorySample,
    MetricSet,
    Prediction,
    f1_score,
    peak_memory,
    phase_duration,
)
from .protocol import (
    EventKind,
    RunConfig,
    RunnerEvent,
    decode_event,
    encode_config,
    extract_predictions,
    validate_sequence,
)
from .simmeter import LoadProfile, parse_profile, synth_trace
from .seeding import derive_seed
from .synthrunner import SyntheticRunnerSpec, script as synth_script
from .trace import (
    BaselineEstimate,
    Phase,
    PhaseLog,
    PowerSample,
    PowerTrace,
    TraceReader,
    estimate_baseline,
    integrate_energy,
    mean_power,
    parse_trace,
    slice_by_phase,
    subtract_baseline,
    summed_power,
)

NEGATIVE_FRACTION_WARN = 0.10
METER_GAP_FACTOR = 3.0
MEMORY_POLL_INTERVAL_S = 0.1
DEFAULT_COOLING_S = 30.0
DEFAULT_REPEATS = 5
TIMEOUT_FLOOR_S = 120.0
TIMEOUT_HEADROOM = 10.0

SWEEPABLE_PARAMS = ("batch_size", "input_size", "token_window")


# --- clocks -----------------------------------------------------------------

class WallClock:
    """Monotonic wall time; sleeps for real."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class VirtualClock:
    """Simulated time: sleeping just advances the counter."""

    def __init__(self, start: float = 0.0):
        self._t = start

    def now(self) -> float:
        return self._t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            self._t += seconds


# --- meter and runner specs -------------------------------------------------

@dataclass(frozen=True)
class MeterSpec:
    """Parsed meter source: ``sim:<profile>``, ``replay:<path>`` or ``live:<path>``.

    Replay sources take the recorded file's own timestamps; live sources
    tail a growing file (e.g. a serial logger's output), re-basing row
    timestamps so the first row aligns with the harness clock at receipt.
    """

    kind: str  # "sim" | "replay" | "live"
    profile: LoadProfile | None = None
    path: str | None = None

    @classmethod
    def parse(cls, text: str) -> "MeterSpec":
        if ":" not in text:
            raise ManifestError(f"meter spec {text!r} must look like kind:detail")
        kind, _, detail = text.partition(":")
        if kind == "sim":
            return cls(kind="sim", profile=parse_profile(detail))
        if kind in ("replay", "live"):
            if not detail:
                raise ManifestError(f"meter spec {text!r} is missing a path")
            return cls(kind=kind, path=detail)
        raise ManifestError(f"unknown meter kind {kind!r} (expected sim, replay or live)")


@dataclass(frozen=True)
class SyntheticRunner:
    """Launch spec for the built-in in-process synthetic runner."""

    spec: SyntheticRunnerSpec = field(default_factory=SyntheticRunnerSpec)


@dataclass(frozen=True)
class CommandRunner:
    """Launch spec for a real runner child process."""

    argv: tuple[str, ...]

    def __post_init__(self):
        if not self.argv:
            raise ManifestError("runner command must not be empty")
        object.__setattr__(self, "argv", tuple(self.argv))


RunnerSpec = SyntheticRunner | CommandRunner


# --- records ----------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    """Complete evidence of one measured run.

    ``metrics`` is derived exclusively from the other fields and can be
    recomputed bit-for-bit with :func:`recompute_metrics`. ``started_at``
    is seconds on the campaign clock (virtual or wall) at run start;
    consecutive records of a serial campaign have increasing values.
    """

    config: RunConfig
    phases: PhaseLog
    raw_trace: PowerTrace
    baseline: BaselineEstimate
    memory: tuple[MemorySample, ...]
    metrics: MetricSet
    warnings: tuple[str, ...] = ()
    predictions: tuple[Prediction, ...] | None = None
    started_at: float = 0.0


@dataclass(frozen=True)
class SweepSpec:
    """Parameter grid, repeat count and cooling interval for a campaign."""

    base_config: RunConfig
    grid: Mapping[str, Sequence] = field(default_factory=dict)
    repeats: int = DEFAULT_REPEATS
    cooling_seconds: float = DEFAULT_COOLING_S

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.cooling_seconds < 0:
            raise ValueError(f"cooling_seconds must be >= 0, got {self.cooling_seconds}")
        grid = {k: tuple(v) for k, v in self.grid.items()}
        for key, values in grid.items():
            if key not in SWEEPABLE_PARAMS:
                raise ValueError(
                    f"grid key {key!r} is not sweepable (expected one of {', '.join(SWEEPABLE_PARAMS)})"
                )
            if not values:
                raise ValueError(f"grid value list for {key!r} must not be empty")
        object.__setattr__(self, "grid", grid)

    def cell_count(self) -> int:
        total = 1
        for values in self.grid.values():
            total *= len(values)
        return total * self.repeats

    def expand(self) -> list[RunConfig]:
        """Cell configs in deterministic order.

        Grid keys sorted, values in given order, repeat index innermost.
        """
        keys = sorted(self.grid)
        configs = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            overrides = dict(zip(keys, combo))
            for repeat in range(self.repeats):
                configs.append(replace(self.base_config, repeat_index=repeat, **overrides))
        return configs


@dataclass(frozen=True)
class SweepFailure:
    config: RunConfig
    error: str
    error_type: str


@dataclass
class SweepResult:
    records: list[RunRecord] = field(default_factory=list)
    failures: list[SweepFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


ProgressFn = Callable[[int, int, "RunRecord | SweepFailure"], None]


# --- metric assembly (shared by both engines and by recomputation) ----------

def _compute_metrics(
    raw_trace: PowerTrace,
    phases: PhaseLog,
    baseline: BaselineEstimate,
    memory: Sequence[MemorySample],
    predictions: Sequence[Prediction] | None,
) -> tuple[MetricSet, list[str]]:
    warnings: list[str] = []
    subtracted = subtract_baseline(raw_trace, baseline)
    inference_slice = slice_by_phase(subtracted, phases, Phase.INFERENCE)
    frac = inference_slice.negative_fraction or 0.0
    if frac > NEGATIVE_FRACTION_WARN:
        warnings.append(
            f"negative_fraction {frac:.3f} of inference samples after baseline "
            f"subtraction exceeds {NEGATIVE_FRACTION_WARN:.2f}; baseline estimate is suspect"
        )
    f1 = None
    if predictions:
        f1 = f1_score([(p.predicted, p.truth) for p in predictions])
    metrics = MetricSet(
        inference_time_s=phase_duration(phases, Phase.INFERENCE),
        summed_power_w=summed_power(inference_slice),
        mean_power_w=mean_power(inference_slice),
        energy_j=integrate_energy(inference_slice),
        peak_memory_mb=peak_memory(memory, phases, Phase.INFERENCE),
        f1_percent=f1,
    )
    return metrics, warnings


def _meter_warnings(raw_trace: PowerTrace) -> list[str]:
    warnings = []
    threshold = METER_GAP_FACTOR / raw_trace.nominal_rate_hz
    worst = 0.0
    gaps = 0
    for a, b in zip(raw_trace.samples, raw_trace.samples[1:]):
        delta = b.t - a.t
        if delta > threshold:
            gaps += 1
            worst = max(worst, delta)
    if gaps:
        warnings.append(
            f"meter stream has {gaps} gap(s) above {threshold:.4f}s "
            f"(3x nominal period); worst {worst:.4f}s"
        )
    return warnings


def _check_meter_coverage(raw_trace: PowerTrace, phases: PhaseLog) -> None:
    inference = phases.interval(Phase.INFERENCE)
    if not raw_trace.samples:
        raise MeterFailure("meter produced no samples")
    last_t = raw_trace.samples[-1].t
    slack = 2.0 / raw_trace.nominal_rate_hz
    if last_t < inference.end - slack:
        raise MeterFailure(
            f"meter stream ended at t={last_t:.4f}s before inference end "
            f"t={inference.end:.4f}s"
        )


def _assemble(
    config: RunConfig,
    events: Sequence[RunnerEvent],
    receipts: Sequence[float],
    raw_trace: PowerTrace,
    polled_memory: Sequence[MemorySample],
    started_at: float,
) -> RunRecord:
    phases = validate_sequence(events, receipts)
    _check_meter_coverage(raw_trace, phases)
    warnings = _meter_warnings(raw_trace)

    baseline_interval = phases.interval(Phase.BASELINE)
    baseline = estimate_baseline(
        raw_trace,
        window_seconds=baseline_interval.duration,
        start=baseline_interval.start,
    )

    predictions = extract_predictions(events) or None

    # Prefer the harness's own polling; fall back to runner-reported
    # memory when polling saw nothing inside the inference phase.
    reported = _reported_memory(events, receipts)
    memory = tuple(polled_memory)
    try:
        metrics, metric_warnings = _compute_metrics(
            raw_trace, phases, baseline, memory, predictions
        )
    except NoSamplesInPhase:
        if not reported:
            raise
        memory = tuple(reported)
        metrics, metric_warnings = _compute_metrics(
            raw_trace, phases, baseline, memory, predictions
        )
        warnings.append("memory from runner reports (harness polling saw no samples)")
    warnings.extend(metric_warnings)

    return RunRecord(
        config=config,
        phases=phases,
        raw_trace=raw_trace,
        baseline=baseline,
        memory=memory,
        metrics=metrics,
        warnings=tuple(warnings),
        predictions=tuple(predictions) if predictions else None,
        started_at=started_at,
    )


def _reported_memory(
    events: Sequence[RunnerEvent], receipts: Sequence[float]
) -> list[MemorySample]:
    samples = []
    prev_t = None
    for event, t in zip(events, receipts):
        if event.kind != EventKind.MEMORY_REPORT or event.resident_bytes is None:
            continue
        if prev_t is not None and t <= prev_t:
            continue
        samples.append(MemorySample(t, event.resident_bytes))
        prev_t = t
    return samples


def recompute_metrics(record: RunRecord) -> MetricSet:
    """Re-derive the MetricSet from stored evidence.

    Deterministic: equals the stored metrics exactly for an intact record.
    """
    metrics, _ = _compute_metrics(
        record.raw_trace,
        record.phases,
        record.baseline,
        record.memory,
        record.predictions,
    )
    return metrics


def _read_replay(path: str) -> PowerTrace:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MeterFailure(f"cannot read replay trace {path!r}: {exc}") from None
    return parse_trace(text, source_id=f"replay:{path}")


# --- virtual engine ---------------------------------------------------------

def _execute_virtual(
    config: RunConfig,
    meter: MeterSpec,
    runner: SyntheticRunner,
    clock: VirtualClock,
) -> RunRecord:
    started_at = clock.now()
    events, receipts, memory = synth_script(runner.spec, config)

    # Building the trace needs the phase log; validate first. A fatal
    # script (e.g. bad dataset_ref) raises RunnerFailure here, before any
    # meter work, like a real runner would.
    phases = validate_sequence(events, receipts)

    if meter.kind == "sim":
        seed = derive_seed(
            meter.profile.seed,
            config.model_id, config.device_id, config.framework_id,
            config.input_size, config.batch_size, config.token_window,
            config.dataset_ref, config.seed, config.repeat_index,
        )
        raw_trace = synth_trace(meter.profile, phases, seed=seed)
    elif meter.kind == "replay":
        raw_trace = _read_replay(meter.path)
    else:
        raise ManifestError("live meters require a command runner")

    record = _assemble(config, events, receipts, raw_trace, memory, started_at)
    clock.sleep(receipts[-1])  # advance past the simulated run
    return record


# --- subprocess engine ------------------------------------------------------

class _SharedRunState:
    """State shared between the reader threads of one live run."""

    def __init__(self):
        self.current_phase: Phase | None = None
        self.stop = threading.Event()
        self.finished = threading.Event()  # terminal event received or EOF


def _stdout_reader(
    proc: subprocess.Popen,
    t0: float,
    state: _SharedRunState,
    events: list[RunnerEvent],
    receipts: list[float],
    errors: list[EdgebenchError],
):
    try:
        for raw in proc.stdout:
            receipt = time.monotonic() - t0
            line = raw.strip()
            if not line:
                continue
            try:
                event = decode_event(line)
            except EdgebenchError as exc:
                errors.append(exc)
                break
            events.append(event)
            receipts.append(receipt)
            if event.kind == EventKind.PHASE_START:
                state.current_phase = event.phase
            elif event.kind == EventKind.PHASE_END:
                state.current_phase = None
            if event.kind in (EventKind.DONE, EventKind.FATAL):
                break
    finally:
        state.finished.set()


def _stderr_reader(proc: subprocess.Popen, chunks: list[str]):
    tail_budget = 4000
    for raw in proc.stderr:
        chunks.append(raw)
        while sum(len(c) for c in chunks) > tail_budget and len(chunks) > 1:
            chunks.pop(0)


def _sim_meter_thread(
    profile: LoadProfile,
    seed: int,
    t0: float,
    state: _SharedRunState,
    samples: list[PowerSample],
):
    rng = random.Random(seed)
    period = 1.0 / profile.rate_hz
    k = 0
    while not state.stop.is_set():
        target = t0 + k * period
        delay = target - time.monotonic()
        if delay > 0:
            if state.stop.wait(delay):
                break
        t = time.monotonic() - t0
        watts = profile.level(state.current_phase)
        if profile.noise_std_w > 0:
            watts = max(0.0, watts + rng.gauss(0.0, profile.noise_std_w))
        samples.append(PowerSample(t, watts))
        k += 1


def _live_meter_thread(
    path: str,
    t0: float,
    state: _SharedRunState,
    samples: list[PowerSample],
    errors: list[EdgebenchError],
):
    reader = TraceReader()
    offset: float | None = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            while True:
                raw = fh.readline()
                if not raw:
                    if state.stop.wait(0.02):
                        break
                    continue
                if not raw.endswith("\n") and not state.stop.is_set():
                    # partial line still being written; wait for the rest
                    while not raw.endswith("\n"):
                        more = fh.readline()
                        if more:
                            raw += more
                        elif state.stop.wait(0.02):
                            break
                sample = reader.feed_line(raw)
                if sample is None:
                    continue
                if offset is None:
                    offset = (time.monotonic() - t0) - sample.t
                samples.append(PowerSample(sample.t + offset, sample.watts))
    except EdgebenchError as exc:
        errors.append(exc)


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        parent = psutil.Process(proc.pid)
        children = parent.children(recursive=True)
    except psutil.NoSuchProcess:
        children = []
    for child in children:
        try:
            child.kill()
        except psutil.NoSuchProcess:
            pass
    proc.kill()


def _memory_poller(
    proc: subprocess.Popen,
    t0: float,
    state: _SharedRunState,
    samples: list[MemorySample],
):
    try:
        root = psutil.Process(proc.pid)
    except psutil.NoSuchProcess:
        return
    prev_t = None
    while not state.stop.is_set():
        try:
            rss = root.memory_info().rss
            for child in root.children(recursive=True):
                try:
                    rss += child.memory_info().rss
                except psutil.NoSuchProcess:
                    pass
        except psutil.NoSuchProcess:
            return
        t = time.monotonic() - t0
        if prev_t is None or t > prev_t:
            samples.append(MemorySample(t, rss))
            prev_t = t
        if state.stop.wait(MEMORY_POLL_INTERVAL_S):
            return


def _wall_trace(samples: list[PowerSample], rate_hz: float, source_id: str) -> tuple[PowerTrace, list[str]]:
    # Wall-clock stamping can produce equal or reordered timestamps under
    # scheduler jitter; drop violators rather than fail the run.
    kept: list[PowerSample] = []
    dropped = 0
    for s in samples:
        if kept and s.t <= kept[-1].t:
            dropped += 1
            continue
        kept.append(s)
    warnings = []
    if dropped:
        warnings.append(f"dropped {dropped} non-monotonic meter sample(s)")
    return PowerTrace(tuple(kept), nominal_rate_hz=rate_hz, source_id=source_id), warnings


def _execute_subprocess(
    config: RunConfig,
    meter: MeterSpec,
    runner: CommandRunner,
    timeout_s: float,
) -> RunRecord:
    started_at = time.time()
    state = _SharedRunState()
    events: list[RunnerEvent] = []
    receipts: list[float] = []
    power_samples: list[PowerSample] = []
    memory_samples: list[MemorySample] = []
    decode_errors: list[EdgebenchError] = []
    meter_errors: list[EdgebenchError] = []
    stderr_chunks: list[str] = []

    t0 = time.monotonic()
    try:
        proc = subprocess.Popen(
            runner.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
    except OSError as exc:
        raise RunnerFailure(f"could not launch runner {runner.argv[0]!r}: {exc}") from None

    threads = [
        threading.Thread(target=_stdout_reader, args=(proc, t0, state, events, receipts, decode_errors), daemon=True),
        threading.Thread(target=_stderr_reader, args=(proc, stderr_chunks), daemon=True),
        threading.Thread(target=_memory_poller, args=(proc, t0, state, memory_samples), daemon=True),
    ]
    rate_hz = 16.0
    source_id = meter.kind
    if meter.kind == "sim":
        rate_hz = meter.profile.rate_hz
        seed = derive_seed(meter.profile.seed, config.seed, config.repeat_index, "wall")
        source_id = f"sim:seed={seed}"
        threads.append(
            threading.Thread(
                target=_sim_meter_thread,
                args=(meter.profile, seed, t0, state, power_samples),
                daemon=True,
            )
        )
    elif meter.kind == "live":
        source_id = f"live:{meter.path}"
        threads.append(
            threading.Thread(
                target=_live_meter_thread,
                args=(meter.path, t0, state, power_samples, meter_errors),
                daemon=True,
            )
        )
    for thread in threads:
        thread.start()

    timed_out = False
    try:
        proc.stdin.write(encode_config(config) + "\n")
        proc.stdin.flush()
        proc.stdin.close()

        if not state.finished.wait(timeout=timeout_s):
            timed_out = True
    finally:
        state.stop.set()
        if timed_out or proc.poll() is None:
            if timed_out:
                _kill_tree(proc)
        try:
            proc.wait(timeout=10.0)
        except subprocess.TimeoutExpired:
            _kill_tree(proc)
            proc.wait()
        for thread in threads:
            thread.join(timeout=5.0)

    if timed_out:
        raise RunTimeout(
            f"runner exceeded the {timeout_s:.0f}s wall limit for {config.model_id}"
        )
    if decode_errors:
        raise decode_errors[0]
    if meter_errors:
        raise MeterFailure(f"live meter stream failed: {meter_errors[0]}")

    terminal = events[-1].kind if events else None
    if terminal not in (EventKind.DONE, EventKind.FATAL):
        tail = "".join(stderr_chunks).strip()
        detail = f"runner exited with code {proc.returncode} without done/fatal"
        if tail:
            detail += f"; stderr tail: {tail[-500:]}"
        raise RunnerFailure(detail)

    if meter.kind == "replay":
        raw_trace = _read_replay(meter.path)
        trace_warnings: list[str] = []
    else:
        raw_trace, trace_warnings = _wall_trace(power_samples, rate_hz, source_id)

    record = _assemble(config, events, receipts, raw_trace, memory_samples, started_at)
    if trace_warnings:
        record = replace(record, warnings=record.warnings + tuple(trace_warnings))
    return record


# --- public entry points ----------------------------------------------------

def execute_run(
    config: RunConfig,
    meter: MeterSpec,
    runner: RunnerSpec,
    *,
    clock: VirtualClock | None = None,
    timeout_s: float | None = None,
) -> RunRecord:
    """Execute one measured run and assemble its record.

    Synthetic runners execute on a virtual clock (pass ``clock`` to share
    one across a campaign); command runners are spawned as child
    processes under a wall-clock timeout.
    """
    if isinstance(runner, SyntheticRunner):
        return _execute_virtual(config, meter, runner, clock or VirtualClock())
    return _execute_subprocess(config, meter, runner, timeout_s or TIMEOUT_FLOOR_S)


def _cell_key(config: RunConfig) -> tuple:
    return (
        config.model_id, config.device_id, config.framework_id,
        config.input_size, config.batch_size, config.token_window,
        config.dataset_ref,
    )


def execute_sweep(
    spec: SweepSpec,
    meter: MeterSpec,
    runner: RunnerSpec,
    *,
    clock: VirtualClock | None = None,
    abort_on_error: bool = False,
    timeout_s: float | None = None,
    on_progress: ProgressFn | None = None,
) -> SweepResult:
    """Execute the full grid × repeats, serially and in deterministic order.

    Failed cells are recorded and the sweep continues unless
    ``abort_on_error`` is set. The wall timeout for a cell defaults to
    10x the longest observed run of the same configuration, with a 120 s
    floor; ``timeout_s`` overrides it.
    """
    if isinstance(runner, SyntheticRunner) and clock is None:
        clock = VirtualClock()
    wall = WallClock()
    configs = spec.expand()
    total = len(configs)
    observed: dict[tuple, float] = {}
    result = SweepResult()

    for index, config in enumerate(configs):
        if index > 0:
            (clock or wall).sleep(spec.cooling_seconds)
        key = _cell_key(config)
        effective_timeout = timeout_s
        if effective_timeout is None:
            effective_timeout = max(TIMEOUT_FLOOR_S, TIMEOUT_HEADROOM * observed.get(key, 0.0))
        run_started = wall.now()
        try:
            record = execute_run(
                config, meter, runner, clock=clock, timeout_s=effective_timeout
            )
        except EdgebenchError as exc:
            failure = SweepFailure(config=config, error=str(exc), error_type=type(exc).__name__)
            result.failures.append(failure)
            if on_progress:
                on_progress(index, total, failure)
            if abort_on_error:
                break
            continue
        observed[key] = max(observed.get(key, 0.0), wall.now() - run_started)
        result.records.append(record)
        if on_progress:
            on_progress(index, total, record)
    return result


def collect_events(
    argv: Sequence[str],
    config: RunConfig,
    timeout_s: float = 30.0,
) -> tuple[list[RunnerEvent], list[float]]:
    """Drive one protocol session against a runner command, without a meter.

    Returns the decoded events and their harness receipt times. Useful for
    protocol conformance checks and debugging a runner implementation.
    """
    t0 = time.monotonic()
    proc = subprocess.Popen(
        list(argv),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    events: list[RunnerEvent] = []
    receipts: list[float] = []
    try:
        proc.stdin.write(encode_config(config) + "\n")
        proc.stdin.flush()
        proc.stdin.close()
        deadline = t0 + timeout_s
        for raw in proc.stdout:
            receipt = time.monotonic() - t0
            if time.monotonic() > deadline:
                raise RunTimeout(f"runner exceeded {timeout_s}s in protocol session")
            line = raw.strip()
            if not line:
                continue
            event = decode_event(line)
            events.append(event)
            receipts.append(receipt)
            if event.kind in (EventKind.DONE, EventKind.FATAL):
                break
    finally:
        if proc.poll() is None:
            _kill_tree(proc)
        proc.wait()
    return events, receipts
