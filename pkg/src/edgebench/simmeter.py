"""Deterministic simulated power meter and trace replayer.

The simulator is the test double for a USB meter: it draws a configured
baseline wattage plus a per-phase delta, with optional seeded Gaussian
noise, on a sampling grid aligned to t=0. Identical seeds give identical
traces. The replayer turns a recorded trace file back into a stream,
preserving relative timing scaled by 1/speed.

Profile string syntax (used by campaign manifests)::

    sim:baseline=2.0,inference=+3.0,noise=0.05,rate=16,seed=42

Keys ``baseline``, ``noise``, ``rate``, ``seed``, ``jitter`` plus one
key per phase name (``dataset_load``, ``model_load``, ``inference``)
giving the additional watts drawn during that phase. ``jitter`` shifts
each phase boundary by a seeded uniform offset in [-jitter, +jitter]
seconds when classifying samples, for robustness tests; default 0.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import ManifestError
from .trace import (
    DEFAULT_RATE_HZ,
    Phase,
    PhaseLog,
    PowerSample,
    PowerTrace,
    TraceReader,
)


@dataclass(frozen=True)
class LoadProfile:
    """Baseline draw plus per-phase load deltas for the simulated meter."""

    baseline_w: float = 2.0
    phase_deltas: Mapping[Phase, float] = field(default_factory=dict)
    noise_std_w: float = 0.0
    rate_hz: float = DEFAULT_RATE_HZ
    seed: int = 0
    boundary_jitter_s: float = 0.0

    def __post_init__(self):
        if self.baseline_w < 0:
            raise ValueError(f"baseline_w must be >= 0, got {self.baseline_w}")
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be > 0, got {self.rate_hz}")
        if self.noise_std_w < 0:
            raise ValueError(f"noise_std_w must be >= 0, got {self.noise_std_w}")
        if self.boundary_jitter_s < 0:
            raise ValueError(f"boundary_jitter_s must be >= 0, got {self.boundary_jitter_s}")
        object.__setattr__(self, "phase_deltas", dict(self.phase_deltas))

    def level(self, phase: Phase | None) -> float:
        """Expected wattage while the given phase (or none) is active."""
        if phase is None:
            return self.baseline_w
        return self.baseline_w + self.phase_deltas.get(phase, 0.0)


def parse_profile(spec: str) -> LoadProfile:
    """Parse the ``key=value`` body of a ``sim:`` meter spec."""
    baseline = 2.0
    noise = 0.0
    rate = DEFAULT_RATE_HZ
    seed = 0
    jitter = 0.0
    deltas: dict[Phase, float] = {}
    body = spec.strip()
    if body:
        for item in body.split(","):
            if "=" not in item:
                raise ManifestError(f"bad sim profile item {item!r} (expected key=value)")
            key, _, value = item.partition("=")
            key = key.strip()
            value = value.strip()
            try:
                if key == "baseline":
                    baseline = float(value)
                elif key == "noise":
                    noise = float(value)
                elif key == "rate":
                    rate = float(value)
                elif key == "seed":
                    seed = int(value)
                elif key == "jitter":
                    jitter = float(value)
                else:
                    deltas[Phase(key)] = float(value)
            except ValueError:
                raise ManifestError(f"bad sim profile value {item!r}") from None
    try:
        return LoadProfile(
            baseline_w=baseline, phase_deltas=deltas, noise_std_w=noise,
            rate_hz=rate, seed=seed, boundary_jitter_s=jitter,
        )
    except ValueError as exc:
        raise ManifestError(f"bad sim profile: {exc}") from None


def _classification_bounds(
    phases: PhaseLog, jitter: float, rng: random.Random
) -> list[tuple[Phase, float, float]]:
    bounds = []
    for interval in phases:
        start, end = interval.start, interval.end
        if jitter > 0:
            start += rng.uniform(-jitter, jitter)
            end += rng.uniform(-jitter, jitter)
        bounds.append((interval.phase, start, end))
    return bounds


def _enclosing_phase(bounds: list[tuple[Phase, float, float]], t: float) -> Phase | None:
    for phase, start, end in bounds:
        if start <= t < end:
            return phase
    return None


def synth_trace(profile: LoadProfile, phases: PhaseLog, seed: int | None = None) -> PowerTrace:
    """Generate a trace over the phase log's full timeline.

    Samples sit at k/rate_hz for k = 0, 1, ... while t stays below the end
    of the last phase; each expected value is the profile level of the
    enclosing phase (boundaries optionally jittered once per trace for
    robustness tests). Noise is seeded Gaussian, truncated at zero
    because raw meter readings cannot be negative.
    """
    if seed is None:
        seed = profile.seed
    rng = random.Random(seed)
    bounds = _classification_bounds(phases, profile.boundary_jitter_s, rng)
    end = phases.end
    rate = profile.rate_hz
    samples = []
    k = 0
    while True:
        t = k / rate
        if t >= end:
            break
        watts = profile.level(_enclosing_phase(bounds, t))
        if profile.noise_std_w > 0:
            watts = max(0.0, watts + rng.gauss(0.0, profile.noise_std_w))
        samples.append(PowerSample(t, watts))
        k += 1
    return PowerTrace(tuple(samples), nominal_rate_hz=rate, source_id=f"sim:seed={seed}")


def replay_trace(path, speed: float = float("inf")) -> Iterator[PowerSample]:
    """Stream samples from a recorded trace file.

    Timestamps are preserved from the file; emission is paced so the
    relative spacing is scaled by 1/speed (``speed=inf`` emits as fast as
    possible, for tests). A malformed row terminates the stream by
    raising after all preceding samples were emitted.
    """
    import time

    if speed <= 0:
        raise ValueError(f"speed must be > 0, got {speed}")
    reader = TraceReader()
    prev_t: float | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            sample = reader.feed_line(raw)
            if sample is None:
                continue
            if prev_t is not None and speed != float("inf"):
                time.sleep((sample.t - prev_t) / speed)
            prev_t = sample.t
            yield sample
