"""Built-in synthetic runner: the harness's own protocol test double.

It plays the runner side of the wire protocol with fully scripted timing
and deterministic predictions, in two interchangeable modes:

* **virtual** — :func:`script` produces the complete event stream with
  virtual timestamps plus a synthetic memory profile, so the orchestrator
  can execute a whole run without spawning a process or sleeping. Used by
  tests and desk-scale campaigns.
* **subprocess** — ``python -m edgebench.synthrunner`` speaks the same
  protocol over stdio in wall time (it actually idles and sleeps), which
  exercises the harness's real process supervision path.

Timing model: inference is either a fixed total (``inference_s``) or
``ceil(n_inputs / batch_size)`` batches of
``batch_overhead_s + batch_size * input_size * per_input_unit_s`` seconds,
so sweeps over input size and batch size produce non-flat curves.
"""

from __future__ import annotations

import argparse
import math
import random
import sys
import time
from dataclasses import dataclass

from .metrics import MIB, MemorySample
from .protocol import (
    EventKind,
    RunConfig,
    RunnerEvent,
    decode_config,
    encode_event,
)
from .seeding import derive_seed
from .trace import Phase

SUPPORTED_DATASET_PREFIX = "synthetic"


@dataclass(frozen=True)
class SyntheticRunnerSpec:
    """Parameters of the synthetic runner's timing and prediction model."""

    dataset_load_s: float = 0.2
    model_load_s: float = 0.3
    inference_s: float | None = None  # fixed total; None derives from workload
    n_inputs: int = 10
    error_rate: float = 0.0
    n_classes: int = 4
    per_input_unit_s: float = 1e-4
    batch_overhead_s: float = 0.05
    base_memory_mb: float = 96.0
    dataset_memory_mb: float = 32.0
    model_memory_mb: float = 220.0

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ValueError(f"n_inputs must be >= 1, got {self.n_inputs}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError(f"error_rate must be in [0, 1], got {self.error_rate}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")

    def batch_spans(self, config: RunConfig) -> list[int]:
        """Input counts per batch: full batches then the remainder."""
        sizes = []
        remaining = self.n_inputs
        while remaining > 0:
            take = min(config.batch_size, remaining)
            sizes.append(take)
            remaining -= take
        return sizes

    def batch_seconds(self, config: RunConfig, batch_len: int) -> float:
        return self.batch_overhead_s + batch_len * config.input_size * self.per_input_unit_s

    def inference_duration(self, config: RunConfig) -> float:
        if self.inference_s is not None:
            return self.inference_s
        return sum(self.batch_seconds(config, b) for b in self.batch_spans(config))


def prediction_pairs(spec: SyntheticRunnerSpec, config: RunConfig) -> list[tuple[str, str, str]]:
    """Deterministic (input_id, predicted, truth) triples for one run.

    Identical config + seed give identical sequences; the expected
    micro-F1 is (1 - error_rate) * 100.
    """
    rng = random.Random(derive_seed("synthetic-runner", config.seed, config.repeat_index))
    labels = [f"c{i}" for i in range(spec.n_classes)]
    out = []
    for i in range(spec.n_inputs):
        truth = rng.choice(labels)
        if rng.random() < spec.error_rate:
            wrong = [l for l in labels if l != truth]
            predicted = rng.choice(wrong)
        else:
            predicted = truth
        out.append((str(i), predicted, truth))
    return out


def _dataset_supported(dataset_ref: str) -> bool:
    return dataset_ref == SUPPORTED_DATASET_PREFIX or dataset_ref.startswith(
        SUPPORTED_DATASET_PREFIX + ":"
    )


def script(
    spec: SyntheticRunnerSpec, config: RunConfig
) -> tuple[list[RunnerEvent], list[float], list[MemorySample]]:
    """Full virtual run: events, their virtual receipt times, memory samples.

    Times are seconds relative to run start. An unsupported dataset_ref
    produces a fatal-terminated stream, mirroring the subprocess stub.
    """
    events: list[RunnerEvent] = [RunnerEvent(kind=EventKind.HELLO, t_runner=0.0)]
    times: list[float] = [0.0]

    if not _dataset_supported(config.dataset_ref):
        events.append(
            RunnerEvent(
                kind=EventKind.FATAL,
                message=f"unknown dataset_ref {config.dataset_ref!r}",
                t_runner=0.0,
            )
        )
        times.append(0.0)
        return events, times, []

    def mark(kind: EventKind, t: float, **kw):
        events.append(RunnerEvent(kind=kind, t_runner=t, **kw))
        times.append(t)

    t = 0.0
    mark(EventKind.PHASE_START, t, phase=Phase.BASELINE)
    t += config.baseline_seconds
    mark(EventKind.PHASE_END, t, phase=Phase.BASELINE)
    dataset_end = t
    if spec.dataset_load_s > 0:
        mark(EventKind.PHASE_START, t, phase=Phase.DATASET_LOAD)
        t += spec.dataset_load_s
        mark(EventKind.PHASE_END, t, phase=Phase.DATASET_LOAD)
        dataset_end = t
    model_end = t
    if spec.model_load_s > 0:
        mark(EventKind.PHASE_START, t, phase=Phase.MODEL_LOAD)
        t += spec.model_load_s
        mark(EventKind.PHASE_END, t, phase=Phase.MODEL_LOAD)
        model_end = t

    inference_total = spec.inference_duration(config)
    pairs = prediction_pairs(spec, config)
    inference_start = t
    mark(EventKind.PHASE_START, t, phase=Phase.INFERENCE)
    for i, (input_id, predicted, truth) in enumerate(pairs):
        t_pred = inference_start + inference_total * (i + 0.5) / len(pairs)
        mark(
            EventKind.PREDICTION,
            t_pred,
            input_id=input_id,
            predicted=predicted,
            truth=truth,
        )
    t = inference_start + inference_total
    mark(EventKind.PHASE_END, t, phase=Phase.INFERENCE)
    mark(EventKind.DONE, t)

    memory = _memory_profile(spec, dataset_end, model_end, end=t)
    return events, times, memory


def _memory_profile(
    spec: SyntheticRunnerSpec, dataset_end: float, model_end: float, end: float
) -> list[MemorySample]:
    # Piecewise-constant resident set, stepping up after each load phase;
    # sampled at 4 Hz like the harness's real poller.
    samples = []
    j = 0
    while True:
        t = j / 4.0
        if t >= end:
            break
        mb = spec.base_memory_mb
        if t >= dataset_end:
            mb += spec.dataset_memory_mb
        if t >= model_end:
            mb += spec.model_memory_mb
        samples.append(MemorySample(t, int(mb * MIB)))
        j += 1
    return samples


# --- subprocess stub --------------------------------------------------------

def _emit(line: str) -> None:
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def _run_stub(spec: SyntheticRunnerSpec, config: RunConfig) -> None:
    t0 = time.monotonic()

    def now() -> float:
        return time.monotonic() - t0

    def emit_event(kind: EventKind, **kw):
        _emit(encode_event(RunnerEvent(kind=kind, t_runner=now(), **kw)))

    emit_event(EventKind.HELLO)
    if not _dataset_supported(config.dataset_ref):
        raise RuntimeError(f"unknown dataset_ref {config.dataset_ref!r}")

    emit_event(EventKind.PHASE_START, phase=Phase.BASELINE)
    time.sleep(config.baseline_seconds)
    emit_event(EventKind.PHASE_END, phase=Phase.BASELINE)

    if spec.dataset_load_s > 0:
        emit_event(EventKind.PHASE_START, phase=Phase.DATASET_LOAD)
        time.sleep(spec.dataset_load_s)
        emit_event(EventKind.PHASE_END, phase=Phase.DATASET_LOAD)
    if spec.model_load_s > 0:
        emit_event(EventKind.PHASE_START, phase=Phase.MODEL_LOAD)
        time.sleep(spec.model_load_s)
        emit_event(EventKind.PHASE_END, phase=Phase.MODEL_LOAD)

    pairs = prediction_pairs(spec, config)
    emit_event(EventKind.PHASE_START, phase=Phase.INFERENCE)
    cursor = 0
    for batch_len in spec.batch_spans(config):
        if spec.inference_s is not None:
            time.sleep(spec.inference_s * batch_len / spec.n_inputs)
        else:
            time.sleep(spec.batch_seconds(config, batch_len))
        for input_id, predicted, truth in pairs[cursor : cursor + batch_len]:
            emit_event(
                EventKind.PREDICTION, input_id=input_id, predicted=predicted, truth=truth
            )
        cursor += batch_len
    emit_event(EventKind.PHASE_END, phase=Phase.INFERENCE)
    emit_event(EventKind.DONE)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="edgebench.synthrunner",
        description="Synthetic inference runner speaking the edgebench stdio protocol.",
    )
    parser.add_argument("--dataset-load-s", type=float, default=0.2)
    parser.add_argument("--model-load-s", type=float, default=0.3)
    parser.add_argument("--inference-s", type=float, default=None)
    parser.add_argument("--n-inputs", type=int, default=10)
    parser.add_argument("--error-rate", type=float, default=0.0)
    parser.add_argument("--n-classes", type=int, default=4)
    parser.add_argument("--per-input-unit-s", type=float, default=1e-4)
    parser.add_argument("--batch-overhead-s", type=float, default=0.05)
    args = parser.parse_args(argv)

    spec = SyntheticRunnerSpec(
        dataset_load_s=args.dataset_load_s,
        model_load_s=args.model_load_s,
        inference_s=args.inference_s,
        n_inputs=args.n_inputs,
        error_rate=args.error_rate,
        n_classes=args.n_classes,
        per_input_unit_s=args.per_input_unit_s,
        batch_overhead_s=args.batch_overhead_s,
    )
    try:
        config = decode_config(sys.stdin.readline())
        _run_stub(spec, config)
    except Exception as exc:  # any failure becomes a fatal event + nonzero exit
        _emit(encode_event(RunnerEvent(kind=EventKind.FATAL, message=str(exc))))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
