"""Independent oracles used by the test suite.

Each oracle recomputes a quantity through a deliberately different route
than the library (exact rational arithmetic, numerical quadrature, full
confusion matrices, explicit language enumeration) so agreement is
evidence of correctness rather than of shared code.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from scipy.integrate import quad


# --- energy: exact rational trapezoid area ----------------------------------

def energy_oracle(points: Sequence[tuple[float, float]]) -> float:
    """Exact polyline area via rational arithmetic over the binary floats."""
    total = Fraction(0)
    for (t0, w0), (t1, w1) in zip(points, points[1:]):
        dt = Fraction(t1) - Fraction(t0)
        total += dt * (Fraction(w0) + Fraction(w1)) / 2
    return float(total)


# --- Student t: quadrature of the density plus bisection --------------------

def t_pdf(x: float, df: int) -> float:
    log_c = (
        math.lgamma((df + 1) / 2.0)
        - math.lgamma(df / 2.0)
        - 0.5 * math.log(df * math.pi)
    )
    return math.exp(log_c - ((df + 1) / 2.0) * math.log1p(x * x / df))


def t_cdf_oracle(x: float, df: int) -> float:
    if x < 0:
        return 1.0 - t_cdf_oracle(-x, df)
    area, _ = quad(t_pdf, 0.0, x, args=(df,), limit=200)
    return 0.5 + area


def t_quantile_oracle(df: int, p: float, tol: float = 1e-9) -> float:
    """Invert the integrated CDF by bisection."""
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile_oracle(df, 1.0 - p, tol)
    lo, hi = 0.0, 1.0
    while t_cdf_oracle(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("bisection bracket exploded")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if t_cdf_oracle(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


# --- F1: full confusion matrix ----------------------------------------------

def f1_oracle(pairs: Sequence[tuple[str, str]], averaging: str) -> float:
    """Brute-force F1 from an explicit truth x predicted confusion matrix.

    Counting is independent of the library (matrix row/column sums versus
    its incremental per-label counters); the final precision/recall
    formula is the shared published definition, applied with identical
    arithmetic so agreement on the counts implies bit-equal results.
    """
    classes = sorted({p for p, _ in pairs} | {t for _, t in pairs})
    matrix = {t: {p: 0 for p in classes} for t in classes}
    for predicted, truth in pairs:
        matrix[truth][predicted] += 1

    def counts_for(c: str) -> tuple[int, int, int]:
        tp = matrix[c][c]
        fp = sum(matrix[t][c] for t in classes if t != c)
        fn = sum(matrix[c][p] for p in classes if p != c)
        return tp, fp, fn

    def f1_from(tp: int, fp: int, fn: int) -> float:
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0.0:
            return 0.0
        return 2.0 * precision * recall / (precision + recall)

    if averaging == "micro":
        tp = sum(counts_for(c)[0] for c in classes)
        fp = sum(counts_for(c)[1] for c in classes)
        fn = sum(counts_for(c)[2] for c in classes)
        return f1_from(tp, fp, fn) * 100.0
    per_class = [f1_from(*counts_for(c)) for c in classes]
    return (sum(per_class) / len(per_class)) * 100.0


# --- protocol grammar: explicit enumeration of the valid language -----------

VALID_PAIR_SEQUENCES: tuple[tuple[str, ...], ...] = (
    ("baseline", "inference"),
    ("baseline", "dataset_load", "inference"),
    ("baseline", "model_load", "inference"),
    ("baseline", "dataset_load", "model_load", "inference"),
)


def valid_event_streams() -> set[tuple[tuple[str, str | None], ...]]:
    """Every accepted (kind, phase) sequence, fully expanded."""
    streams = set()
    for phases in VALID_PAIR_SEQUENCES:
        body = []
        for phase in phases:
            body.append(("phase_start", phase))
            body.append(("phase_end", phase))
        streams.add((("hello", None), *body, ("done", None)))
    return streams


def grammar_oracle(stream: Sequence[tuple[str, str | None]]) -> bool:
    """Membership test against the enumerated language."""
    return tuple(stream) in valid_event_streams()
