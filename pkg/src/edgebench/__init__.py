"""Phase-synchronized power, latency and memory benchmarking for edge inference.

The harness measures an external inference runner from the outside: it
ingests a power meter stream, synchronizes it with the runner's phase
events (baseline, dataset load, model load, inference), subtracts
baseline power, integrates energy over the inference window, and
aggregates repeated runs into mean and 95% confidence interval tables.
"""

from .errors import EdgebenchError
from .metrics import (
    AggregateMetric,
    MemorySample,
    MetricSet,
    Prediction,
    aggregate,
    f1_score,
    peak_memory,
    t_quantile,
)
from .orchestrator import (
    CommandRunner,
    MeterSpec,
    RunRecord,
    SweepResult,
    SweepSpec,
    SyntheticRunner,
    execute_run,
    execute_sweep,
    recompute_metrics,
)
from .protocol import RunConfig, RunnerEvent, validate_sequence
from .report import (
    ComparisonTable,
    RankTable,
    build_comparison,
    build_ranking,
    emit,
    format_interval,
)
from .trace import (
    BaselineEstimate,
    Phase,
    PhaseLog,
    PowerSample,
    PowerTrace,
    estimate_baseline,
    integrate_energy,
    mean_power,
    parse_trace,
    slice_by_phase,
    subtract_baseline,
    summed_power,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateMetric",
    "BaselineEstimate",
    "CommandRunner",
    "ComparisonTable",
    "EdgebenchError",
    "MemorySample",
    "MeterSpec",
    "MetricSet",
    "Phase",
    "PhaseLog",
    "PowerSample",
    "PowerTrace",
    "Prediction",
    "RankTable",
    "RunConfig",
    "RunRecord",
    "RunnerEvent",
    "SweepResult",
    "SweepSpec",
    "SyntheticRunner",
    "aggregate",
    "build_comparison",
    "build_ranking",
    "emit",
    "estimate_baseline",
    "execute_run",
    "execute_sweep",
    "f1_score",
    "format_interval",
    "integrate_energy",
    "mean_power",
    "parse_trace",
    "peak_memory",
    "recompute_metrics",
    "slice_by_phase",
    "subtract_baseline",
    "summed_power",
    "t_quantile",
    "validate_sequence",
    "__version__",
]
