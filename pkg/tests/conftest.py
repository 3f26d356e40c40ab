from __future__ import annotations

import pytest

from edgebench.trace import Phase, PhaseInterval, PhaseLog, PowerSample, PowerTrace


def make_trace(points, rate_hz: float = 16.0, source_id: str = "test") -> PowerTrace:
    return PowerTrace(
        tuple(PowerSample(t, w) for t, w in points),
        nominal_rate_hz=rate_hz,
        source_id=source_id,
    )


def make_phases(*entries) -> PhaseLog:
    return PhaseLog(
        tuple(PhaseInterval(Phase(name), start, end) for name, start, end in entries)
    )


@pytest.fixture
def full_phases() -> PhaseLog:
    return make_phases(
        ("baseline", 0.0, 3.0),
        ("dataset_load", 3.0, 3.5),
        ("model_load", 3.5, 4.0),
        ("inference", 4.0, 9.0),
    )
