"""Per-run quality and resource metrics, plus multi-run aggregation.

F1 is computed from (predicted, true) label pairs; macro averaging is the
default, micro is selectable (micro-F1 over single-label multiclass
predictions equals accuracy). Memory peaks are reported in MiB but labeled
"MB" to match the conventional table rendering of process monitors.
Repeated runs aggregate to mean and a 95% Student-t confidence interval
with n-1 degrees of freedom.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import stats as _scipy_stats

from .errors import (
    EmptyInput,
    EmptyPredictions,
    InvalidDf,
    InvalidP,
    NoSamplesInPhase,
)
from .trace import Phase, PhaseLog

MIB = 1024 * 1024

MACRO = "macro"
MICRO = "micro"


@dataclass(frozen=True)
class Prediction:
    """One labeled model output: opaque predicted and true label tokens."""

    input_id: str
    predicted: str
    truth: str


@dataclass(frozen=True)
class MemorySample:
    """Resident set size of the runner process tree at one instant."""

    t: float
    resident_bytes: int

    def __post_init__(self):
        if self.resident_bytes < 0:
            raise ValueError(f"resident_bytes must be >= 0, got {self.resident_bytes}")


@dataclass(frozen=True)
class MetricSet:
    """Derived metrics of one measured run.

    ``f1_percent`` is None for benchmark-only runs without ground truth.
    ``summed_power_w`` is the raw Watt-sum over the inference slice;
    ``energy_j`` is the trapezoidal integral of the same slice.
    """

    inference_time_s: float
    summed_power_w: float
    mean_power_w: float
    energy_j: float
    peak_memory_mb: float
    f1_percent: float | None = None

    def __post_init__(self):
        if not self.inference_time_s > 0:
            raise ValueError(f"inference_time_s must be > 0, got {self.inference_time_s}")
        if self.peak_memory_mb < 0:
            raise ValueError(f"peak_memory_mb must be >= 0, got {self.peak_memory_mb}")
        if self.f1_percent is not None and not 0.0 <= self.f1_percent <= 100.0:
            raise ValueError(f"f1_percent must be in [0, 100], got {self.f1_percent}")


#: Field names of MetricSet that reports may aggregate.
METRIC_FIELDS = (
    "f1_percent",
    "inference_time_s",
    "summed_power_w",
    "mean_power_w",
    "energy_j",
    "peak_memory_mb",
)


@dataclass(frozen=True)
class AggregateMetric:
    """Mean and 95% (by default) confidence interval over repeated runs."""

    mean: float
    ci_low: float
    ci_high: float
    n: int
    std_dev: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("aggregate needs n >= 1")
        if not self.ci_low <= self.mean <= self.ci_high:
            raise ValueError(
                f"interval must bracket the mean: {self.ci_low} <= {self.mean} <= {self.ci_high}"
            )


def _per_class_counts(pairs: Sequence[tuple[str, str]]) -> dict[str, list[int]]:
    # label -> [tp, fp, fn]
    counts: dict[str, list[int]] = {}
    for predicted, truth in pairs:
        counts.setdefault(predicted, [0, 0, 0])
        counts.setdefault(truth, [0, 0, 0])
        if predicted == truth:
            counts[predicted][0] += 1
        else:
            counts[predicted][1] += 1
            counts[truth][2] += 1
    return counts


def f1_score(pairs: Sequence[tuple[str, str]], averaging: str = MACRO) -> float:
    """F1 over (predicted, true) label pairs, as a percentage.

    Classes are the union of predicted and true labels. Macro averages the
    unweighted per-class F1 (a class with zero precision+recall scores 0);
    micro computes F1 over pooled counts.
    """
    if averaging not in (MACRO, MICRO):
        raise ValueError(f"averaging must be 'macro' or 'micro', got {averaging!r}")
    pairs = list(pairs)
    if not pairs:
        raise EmptyPredictions("f1_score over an empty prediction set")
    counts = _per_class_counts(pairs)
    if averaging == MICRO:
        tp = sum(c[0] for c in counts.values())
        fp = sum(c[1] for c in counts.values())
        fn = sum(c[2] for c in counts.values())
        return _f1_from_counts(tp, fp, fn) * 100.0
    per_class = [_f1_from_counts(*counts[label]) for label in sorted(counts)]
    return (sum(per_class) / len(per_class)) * 100.0


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def phase_duration(phases: PhaseLog, phase: Phase) -> float:
    """end - start of the named phase; raises PhaseAbsent when missing."""
    return phases.interval(phase).duration


def peak_memory(samples: Sequence[MemorySample], phases: PhaseLog, phase: Phase) -> float:
    """Maximum resident set within [start, end) of the phase, in MiB.

    Reported under the label "MB" in tables. Raises
    :class:`NoSamplesInPhase` when no memory sample falls in the phase.
    """
    interval = phases.interval(phase)
    inside = [s.resident_bytes for s in samples if interval.start <= s.t < interval.end]
    if not inside:
        raise NoSamplesInPhase(f"no memory samples in phase {phase.value}")
    return max(inside) / MIB


def t_quantile(df: int, p: float) -> float:
    """Student-t quantile with ``df`` degrees of freedom at probability ``p``.

    Backed by scipy; accurate well beyond the 1e-3 the interval
    construction needs.
    """
    if not isinstance(df, int) or isinstance(df, bool) or df < 1:
        raise InvalidDf(f"degrees of freedom must be a positive integer, got {df!r}")
    if not 0.0 < p < 1.0:
        raise InvalidP(f"probability must be in (0, 1), got {p!r}")
    return float(_scipy_stats.t.ppf(p, df))


def aggregate(values: Iterable[float], confidence: float = 0.95) -> AggregateMetric:
    """Mean and t-based confidence interval over repeated measurements.

    Uses the sample standard deviation (n-1 denominator) and the t
    quantile at (1+confidence)/2 with n-1 degrees of freedom. A single
    value yields a degenerate interval at the mean.
    """
    if not 0.0 < confidence < 1.0:
        raise InvalidP(f"confidence must be in (0, 1), got {confidence!r}")
    data = [float(v) for v in values]
    if not data:
        raise EmptyInput("aggregate over an empty value sequence")
    mean = statistics.fmean(data)
    n = len(data)
    if n == 1:
        return AggregateMetric(mean=mean, ci_low=mean, ci_high=mean, n=1, std_dev=0.0)
    std_dev = statistics.stdev(data)
    half_width = t_quantile(n - 1, (1.0 + confidence) / 2.0) * std_dev / math.sqrt(n)
    return AggregateMetric(
        mean=mean,
        ci_low=mean - half_width,
        ci_high=mean + half_width,
        n=n,
        std_dev=std_dev,
    )
