"""Time-stamped power traces and the analysis steps applied to them.

A trace is an ordered sequence of (t, watts) samples from one meter source.
Analysis is split into small pure functions: baseline estimation over an
early window, baseline subtraction, slicing by lifecycle phase, trapezoidal
energy integration, and two scalar power summaries (plain sum and mean).
The plain sum is rate-dependent and not dimensionally an energy; it is kept
because comparison tables report it, always next to the integrated joules.

Trace file format (UTF-8 text, one sample per line, ``#`` comment lines
ignored):

* watts format: ``t_seconds,watts`` e.g. ``0.0625,2.13``
* volts-amps format: ``t_seconds,volts,amps`` (converted as P = V*I)

A header line ``#format: watts`` or ``#format: va`` selects the format;
without a header the watts format is assumed.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    EmptyTrace,
    EmptyWindow,
    InsufficientSamples,
    MalformedRow,
    NonMonotonicTime,
    PhaseAbsent,
)

DEFAULT_RATE_HZ = 16.0
DEFAULT_BASELINE_WINDOW_S = 3.0

WATTS_FORMAT = "watts"
VA_FORMAT = "va"
TRACE_FORMATS = (WATTS_FORMAT, VA_FORMAT)


class Phase(str, Enum):
    """Lifecycle phases of one measured run, in canonical order."""

    BASELINE = "baseline"
    DATASET_LOAD = "dataset_load"
    MODEL_LOAD = "model_load"
    INFERENCE = "inference"


PHASE_ORDER: tuple[Phase, ...] = (
    Phase.BASELINE,
    Phase.DATASET_LOAD,
    Phase.MODEL_LOAD,
    Phase.INFERENCE,
)

MANDATORY_PHASES: frozenset[Phase] = frozenset({Phase.BASELINE, Phase.INFERENCE})


@dataclass(frozen=True)
class PowerSample:
    """One instantaneous power reading.

    ``t`` is in seconds relative to run start. Raw meter readings are
    non-negative; baseline-subtracted samples may be negative.
    """

    t: float
    watts: float

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError(f"sample timestamp must be finite, got {self.t}")
        if not math.isfinite(self.watts):
            raise ValueError(f"sample watts must be finite, got {self.watts}")


@dataclass(frozen=True)
class PowerTrace:
    """Ordered power samples from one meter source.

    ``negative_fraction`` is a diagnostic set by :func:`subtract_baseline`:
    the fraction of samples that became negative. None on raw traces.
    """

    samples: tuple[PowerSample, ...]
    nominal_rate_hz: float = DEFAULT_RATE_HZ
    source_id: str = ""
    negative_fraction: float | None = None

    def __post_init__(self):
        if self.nominal_rate_hz <= 0:
            raise ValueError(f"nominal_rate_hz must be > 0, got {self.nominal_rate_hz}")
        object.__setattr__(self, "samples", tuple(self.samples))
        prev = None
        for s in self.samples:
            if prev is not None and s.t <= prev:
                raise ValueError(f"trace timestamps must be strictly increasing ({s.t} after {prev})")
            prev = s.t

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[PowerSample]:
        return iter(self.samples)

    @property
    def duration(self) -> float:
        """Span from first to last sample, 0.0 for traces of < 2 samples."""
        if len(self.samples) < 2:
            return 0.0
        return self.samples[-1].t - self.samples[0].t

    def watts_values(self) -> list[float]:
        return [s.watts for s in self.samples]


@dataclass(frozen=True)
class BaselineEstimate:
    """Near-idle power estimated from an early window of the trace."""

    watts: float
    window_seconds: float
    sample_count: int
    dispersion: float  # sample standard deviation, 0.0 for a single sample

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("baseline estimate needs at least one sample")
        if self.watts < 0:
            raise ValueError(f"baseline watts must be >= 0, got {self.watts}")
        if self.dispersion < 0:
            raise ValueError(f"baseline dispersion must be >= 0, got {self.dispersion}")


@dataclass(frozen=True)
class PhaseInterval:
    phase: Phase
    start: float
    end: float

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"phase {self.phase.value}: start {self.start} must be < end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class PhaseLog:
    """Start/end instants of each lifecycle phase of one run.

    Entries are non-overlapping, each phase appears at most once, the order
    is canonical (baseline, dataset_load, model_load, inference), and the
    baseline and inference phases are always present.
    """

    entries: tuple[PhaseInterval, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: list[Phase] = []
        prev_end: float | None = None
        for e in self.entries:
            if e.phase in seen:
                raise ValueError(f"phase {e.phase.value} appears more than once")
            if seen and PHASE_ORDER.index(e.phase) < PHASE_ORDER.index(seen[-1]):
                raise ValueError(f"phase {e.phase.value} out of canonical order")
            if prev_end is not None and e.start < prev_end:
                raise ValueError(f"phase {e.phase.value} overlaps its predecessor")
            seen.append(e.phase)
            prev_end = e.end
        missing = MANDATORY_PHASES - set(seen)
        if missing:
            names = ", ".join(sorted(p.value for p in missing))
            raise ValueError(f"mandatory phase(s) missing: {names}")

    def __iter__(self) -> Iterator[PhaseInterval]:
        return iter(self.entries)

    def has(self, phase: Phase) -> bool:
        return any(e.phase == phase for e in self.entries)

    def interval(self, phase: Phase) -> PhaseInterval:
        for e in self.entries:
            if e.phase == phase:
                return e
        raise PhaseAbsent(phase)

    @property
    def end(self) -> float:
        return self.entries[-1].end


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(line_no, f"{what} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedRow(line_no, f"{what} {token!r} is not finite")
    return value


class TraceReader:
    """Incremental line-by-line parser for the trace file formats.

    Shared by whole-file parsing, replay streaming, and live meter tailing
    so the format rules live in one place. Line numbers are 1-based over
    the raw input, comment lines included.
    """

    def __init__(self, fmt: str | None = None):
        if fmt is not None and fmt not in TRACE_FORMATS:
            raise ValueError(f"unknown trace format {fmt!r}")
        self._requested = fmt
        self._fmt = fmt
        self._line_no = 0
        self._prev_t: float | None = None
        self._saw_data = False

    def feed_line(self, raw: str) -> PowerSample | None:
        """Consume one line; return its sample, or None for blanks/comments."""
        self._line_no += 1
        line_no = self._line_no
        line = raw.strip()
        if not line:
            return None
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("format:"):
                declared = body.split(":", 1)[1].strip().lower()
                if declared not in TRACE_FORMATS:
                    raise MalformedRow(line_no, f"unknown format {declared!r} in header")
                if self._saw_data:
                    raise MalformedRow(line_no, "format header after data rows")
                if self._requested is not None and declared != self._requested:
                    raise MalformedRow(
                        line_no, f"header format {declared!r} conflicts with requested {self._requested!r}"
                    )
                self._fmt = declared
            return None
        if self._fmt is None:
            self._fmt = WATTS_FORMAT
        fields = [f.strip() for f in line.split(",")]
        if self._fmt == WATTS_FORMAT:
            if len(fields) != 2:
                raise MalformedRow(line_no, f"expected 2 fields (t,watts), got {len(fields)}")
            t = _parse_float(fields[0], line_no, "timestamp")
            watts = _parse_float(fields[1], line_no, "watts")
        else:
            if len(fields) != 3:
                raise MalformedRow(line_no, f"expected 3 fields (t,volts,amps), got {len(fields)}")
            t = _parse_float(fields[0], line_no, "timestamp")
            volts = _parse_float(fields[1], line_no, "volts")
            amps = _parse_float(fields[2], line_no, "amps")
            watts = volts * amps
        if watts < 0:
            # raw meter readings cannot be negative; only baseline
            # subtraction may produce negative samples downstream
            raise MalformedRow(line_no, f"negative power {watts!r} at ingestion")
        if self._prev_t is not None and t <= self._prev_t:
            raise NonMonotonicTime(line_no)
        self._prev_t = t
        self._saw_data = True
        return PowerSample(t, watts)


def parse_trace(
    text: str | Iterable[str],
    fmt: str | None = None,
    *,
    nominal_rate_hz: float = DEFAULT_RATE_HZ,
    source_id: str = "",
) -> PowerTrace:
    """Parse a trace file body into a :class:`PowerTrace`.

    ``fmt`` forces the format ("watts" or "va"); when None a ``#format:``
    header line selects it, defaulting to watts. Raises
    :class:`MalformedRow` on unparseable rows and :class:`NonMonotonicTime`
    when a timestamp does not exceed its predecessor.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    reader = TraceReader(fmt)
    samples: list[PowerSample] = []
    for raw in lines:
        sample = reader.feed_line(raw)
        if sample is not None:
            samples.append(sample)
    return PowerTrace(tuple(samples), nominal_rate_hz=nominal_rate_hz, source_id=source_id)


def serialize_trace(trace: PowerTrace, fmt: str = WATTS_FORMAT) -> str:
    """Render a trace back to its file format, with a ``#format:`` header.

    Floats are written with shortest round-trip repr so
    ``parse_trace(serialize_trace(t))`` reproduces the samples exactly.
    The volts-amps form writes a nominal 1.0 V rail with the current
    carrying the power, which keeps V*I bit-exact.
    """
    if fmt not in TRACE_FORMATS:
        raise ValueError(f"unknown trace format {fmt!r}")
    out = [f"#format: {fmt}"]
    for s in trace.samples:
        if fmt == WATTS_FORMAT:
            out.append(f"{s.t!r},{s.watts!r}")
        else:
            out.append(f"{s.t!r},1.0,{s.watts!r}")
    return "\n".join(out) + "\n"


def estimate_baseline(
    trace: PowerTrace,
    window_seconds: float = DEFAULT_BASELINE_WINDOW_S,
    start: float = 0.0,
) -> BaselineEstimate:
    """Mean power over samples with t in [start, start + window_seconds).

    At the default 16 Hz rate and 3 s window this covers the first 48
    samples of a run. Raises :class:`EmptyWindow` when no sample falls in
    the window.
    """
    if window_seconds <= 0:
        raise ValueError(f"window_seconds must be > 0, got {window_seconds}")
    stop = start + window_seconds
    window = [s.watts for s in trace.samples if start <= s.t < stop]
    if not window:
        raise EmptyWindow(f"no samples in [{start}, {stop})")
    mean = statistics.fmean(window)
    dispersion = statistics.stdev(window) if len(window) > 1 else 0.0
    return BaselineEstimate(
        watts=mean,
        window_seconds=window_seconds,
        sample_count=len(window),
        dispersion=dispersion,
    )


def subtract_baseline(trace: PowerTrace, baseline: BaselineEstimate | float) -> PowerTrace:
    """Shift every sample down by the baseline power.

    Negative results are preserved, not clamped: clamping would silently
    bias energy upward. The returned trace carries ``negative_fraction``,
    the fraction of samples that came out negative.
    """
    level = baseline.watts if isinstance(baseline, BaselineEstimate) else float(baseline)
    shifted = tuple(PowerSample(s.t, s.watts - level) for s in trace.samples)
    negatives = sum(1 for s in shifted if s.watts < 0)
    fraction = negatives / len(shifted) if shifted else 0.0
    return PowerTrace(
        shifted,
        nominal_rate_hz=trace.nominal_rate_hz,
        source_id=trace.source_id,
        negative_fraction=fraction,
    )


def slice_by_phase(trace: PowerTrace, phases: PhaseLog, phase: Phase) -> PowerTrace:
    """Samples with t in the half-open [start, end) of the named phase.

    Half-open intervals keep adjacent phase slices disjoint. An empty
    result is valid; a missing phase raises :class:`PhaseAbsent`.
    """
    interval = phases.interval(phase)
    kept = tuple(s for s in trace.samples if interval.start <= s.t < interval.end)
    fraction = None
    if trace.negative_fraction is not None:
        fraction = (sum(1 for s in kept if s.watts < 0) / len(kept)) if kept else 0.0
    return replace(trace, samples=kept, negative_fraction=fraction)


def integrate_energy(trace: PowerTrace) -> float:
    """Trapezoidal integral of watts over t, in joules.

    Exact for piecewise-linear traces sampled at their breakpoints.
    """
    if len(trace) < 2:
        raise InsufficientSamples(f"energy integration needs >= 2 samples, got {len(trace)}")
    total = 0.0
    samples = trace.samples
    for a, b in zip(samples, samples[1:]):
        total += (b.t - a.t) * (a.watts + b.watts) / 2.0
    return total


def summed_power(trace: PowerTrace) -> float:
    """Plain sum of sample watts over the trace (0.0 when empty).

    This is the rate-dependent Watt-sum used in comparison tables. It is
    not an energy; report it next to :func:`integrate_energy`.
    """
    return math.fsum(s.watts for s in trace.samples)


def mean_power(trace: PowerTrace) -> float:
    """Arithmetic mean of sample watts; raises :class:`EmptyTrace` when empty."""
    if not trace.samples:
        raise EmptyTrace("mean power of an empty trace")
    return statistics.fmean(s.watts for s in trace.samples)
