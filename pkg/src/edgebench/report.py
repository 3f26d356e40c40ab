"""Comparison and ranking tables over collections of run records.

Aggregates repeats into per-group mean and confidence interval cells,
renders them in the ``MEAN [LO, HI]`` shape, ranks devices per model and
metric with a CI-overlap tie rule, and emits tables as CSV, JSON or
markdown. All functions here are pure; emission is deterministic byte
for byte.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields as dataclass_fields
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Mapping, Sequence

from .errors import EmptyRecords, InsufficientDevices, UnknownMetric
from .metrics import METRIC_FIELDS, AggregateMetric, aggregate
from .orchestrator import RunRecord
from .protocol import RunConfig

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"
TIE = "~"

DEFAULT_DIRECTIONS: Mapping[str, str] = {
    "inference_time_s": LOWER_BETTER,
    "summed_power_w": LOWER_BETTER,
    "mean_power_w": LOWER_BETTER,
    "energy_j": LOWER_BETTER,
    "peak_memory_mb": LOWER_BETTER,
    "f1_percent": HIGHER_BETTER,
}
_ARROW = {HIGHER_BETTER: "↑", LOWER_BETTER: "↓"}

CONFIG_FIELDS = tuple(f.name for f in dataclass_fields(RunConfig))
DEFAULT_GROUP_BY = ("device_id", "model_id")

CSV_FORMAT = "csv"
JSON_FORMAT = "json"
MARKDOWN_FORMAT = "markdown"
REPORT_FORMATS = (CSV_FORMAT, JSON_FORMAT, MARKDOWN_FORMAT)


def decimals_for(metric: str) -> int:
    """Rendering precision: whole MB for memory, two places otherwise."""
    return 0 if metric == "peak_memory_mb" else 2


# --- number formatting ------------------------------------------------------

def _quantize(value: float, decimals: int) -> Decimal:
    quantum = Decimal(1).scaleb(-decimals)
    d = Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)  # never print "-0.00"
    return d


def format_number(value: float, decimals: int | None = None) -> str:
    """Fixed-point half-even at ``decimals``; shortest float form when None."""
    if decimals is None:
        return str(float(value))
    return str(_quantize(value, decimals))


def format_interval(agg: AggregateMetric, decimals: int = 2) -> str:
    """Render an aggregate as ``MEAN [LO, HI]`` fixed-point, half-even.

    The printed interval always contains the printed mean: if rounding
    ever broke containment the offending bound is widened by one quantum.
    """
    if decimals < 0:
        raise ValueError(f"decimals must be >= 0, got {decimals}")
    quantum = Decimal(1).scaleb(-decimals)
    mean = _quantize(agg.mean, decimals)
    lo = _quantize(agg.ci_low, decimals)
    hi = _quantize(agg.ci_high, decimals)
    # Half-even rounding is monotone, so these never fire in practice;
    # they keep the printed-containment guarantee unconditional.
    while lo > mean:  # pragma: no cover
        lo -= quantum
    while hi < mean:  # pragma: no cover
        hi += quantum
    return f"{mean} [{lo}, {hi}]"


# --- comparison tables ------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    key: tuple
    cells: Mapping[str, AggregateMetric]


@dataclass(frozen=True)
class ComparisonTable:
    group_by: tuple[str, ...]
    metrics: tuple[str, ...]
    rows: tuple[ComparisonRow, ...]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            if row.key in seen:
                raise ValueError(f"duplicate comparison row key {row.key!r}")
            seen.add(row.key)
            for metric in self.metrics:
                if row.cells[metric].n < 1:
                    raise ValueError("comparison cell with n < 1")


def _sort_token(value) -> tuple:
    # Total order across None, numbers and strings so mixed-type grid
    # values still sort deterministically.
    if value is None:
        return (0, "", 0.0)
    if isinstance(value, bool):
        return (1, "", float(value))
    if isinstance(value, (int, float)):
        return (1, "", float(value))
    return (2, str(value), 0.0)


def _metric_value(record: RunRecord, metric: str) -> float:
    value = getattr(record.metrics, metric)
    if value is None:
        raise UnknownMetric(metric, "not available: run recorded no predictions")
    return value


def default_metrics(records: Sequence[RunRecord]) -> tuple[str, ...]:
    """Every metric present in all records; f1 drops out when any run lacks it."""
    names = []
    for name in METRIC_FIELDS:
        if all(getattr(r.metrics, name) is not None for r in records):
            names.append(name)
    return tuple(names)


def build_comparison(
    records: Sequence[RunRecord],
    group_by: Sequence[str] = DEFAULT_GROUP_BY,
    metrics: Sequence[str] | None = None,
    confidence: float = 0.95,
) -> ComparisonTable:
    """Group records and aggregate each requested metric per group.

    Rows are ordered lexicographically on the group key; per-group n sums
    to the total record count.
    """
    if not records:
        raise EmptyRecords("no records to compare")
    group_by = tuple(group_by)
    for field in group_by:
        if field not in CONFIG_FIELDS:
            raise UnknownMetric(field, f"not a config field (expected one of {', '.join(CONFIG_FIELDS)})")
    if metrics is None:
        metric_names = default_metrics(records)
    else:
        metric_names = tuple(metrics)
        for name in metric_names:
            if name not in METRIC_FIELDS:
                raise UnknownMetric(name, f"expected one of {', '.join(METRIC_FIELDS)}")

    groups: dict[tuple, list[RunRecord]] = {}
    for record in records:
        key = tuple(getattr(record.config, field) for field in group_by)
        groups.setdefault(key, []).append(record)

    rows = []
    for key in sorted(groups, key=lambda k: tuple(_sort_token(v) for v in k)):
        members = groups[key]
        cells = {
            name: aggregate((_metric_value(r, name) for r in members), confidence)
            for name in metric_names
        }
        rows.append(ComparisonRow(key=key, cells=cells))
    return ComparisonTable(group_by=group_by, metrics=metric_names, rows=tuple(rows))


# --- ranking ----------------------------------------------------------------

@dataclass(frozen=True)
class RankColumn:
    metric: str
    direction: str

    def __post_init__(self):
        if self.direction not in (HIGHER_BETTER, LOWER_BETTER):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def label(self) -> str:
        return f"{self.metric} {_ARROW[self.direction]}"


@dataclass(frozen=True)
class RankRow:
    model_id: str
    cells: Mapping[str, str]  # column label -> device id or the tie marker


@dataclass(frozen=True)
class RankTable:
    columns: tuple[RankColumn, ...]
    rows: tuple[RankRow, ...]
    devices: tuple[str, ...] = ()

    def __post_init__(self):
        known = set(self.devices) | {TIE}
        for row in self.rows:
            for column in self.columns:
                cell = row.cells[column.label]
                if self.devices and cell not in known:
                    raise ValueError(f"rank cell {cell!r} is not a known device or tie")


def _intervals_overlap(a: AggregateMetric, b: AggregateMetric) -> bool:
    return a.ci_low <= b.ci_high and b.ci_low <= a.ci_high


def _rank_cell(
    per_device: Mapping[str, AggregateMetric], direction: str
) -> str:
    ordered = sorted(
        per_device.items(),
        key=lambda item: (-item[1].mean if direction == HIGHER_BETTER else item[1].mean, item[0]),
    )
    best_device, best = ordered[0]
    _, runner_up = ordered[1]
    if _intervals_overlap(best, runner_up):
        return TIE
    return best_device


def rank_devices(
    table: ComparisonTable,
    metric: str,
    direction: str,
) -> RankTable:
    """Winner-per-model column for one metric.

    The comparison table must be grouped by device and model only; every
    model needs at least two devices to rank.
    """
    if set(table.group_by) != {"device_id", "model_id"}:
        raise ValueError(
            "ranking requires a comparison grouped by exactly device_id and model_id"
        )
    if metric not in table.metrics:
        raise UnknownMetric(metric, "metric not present in the comparison table")
    column = RankColumn(metric=metric, direction=direction)

    device_pos = table.group_by.index("device_id")
    model_pos = table.group_by.index("model_id")
    per_model: dict[str, dict[str, AggregateMetric]] = {}
    for row in table.rows:
        model = row.key[model_pos]
        device = row.key[device_pos]
        per_model.setdefault(model, {})[device] = row.cells[metric]

    rows = []
    for model in sorted(per_model):
        per_device = per_model[model]
        if len(per_device) < 2:
            raise InsufficientDevices(
                f"model {model!r} has {len(per_device)} device(s); ranking needs at least 2"
            )
        rows.append(RankRow(model_id=model, cells={column.label: _rank_cell(per_device, direction)}))
    devices = tuple(sorted({row.key[device_pos] for row in table.rows}))
    return RankTable(columns=(column,), rows=tuple(rows), devices=devices)


def build_ranking(
    table: ComparisonTable,
    directions: Mapping[str, str] = DEFAULT_DIRECTIONS,
) -> RankTable:
    """One ranking column per comparison metric, joined into a table."""
    columns: list[RankColumn] = []
    merged: dict[str, dict[str, str]] = {}
    devices: tuple[str, ...] = ()
    for metric in table.metrics:
        direction = directions.get(metric, LOWER_BETTER)
        single = rank_devices(table, metric, direction)
        columns.append(single.columns[0])
        devices = single.devices
        for row in single.rows:
            merged.setdefault(row.model_id, {}).update(row.cells)
    rows = tuple(
        RankRow(model_id=model, cells=merged[model]) for model in sorted(merged)
    )
    return RankTable(columns=tuple(columns), rows=rows, devices=devices)


# --- emission ---------------------------------------------------------------

def _key_cell(value) -> str:
    if value is None:
        return ""
    return str(value)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _markdown_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _comparison_cells(table: ComparisonTable) -> tuple[list[str], list[list[str]]]:
    header = list(table.group_by) + list(table.metrics)
    rows = []
    for row in table.rows:
        rendered = [_key_cell(v) for v in row.key]
        for metric in table.metrics:
            rendered.append(format_interval(row.cells[metric], decimals_for(metric)))
        rows.append(rendered)
    return header, rows


def _rank_cells(table: RankTable) -> tuple[list[str], list[list[str]]]:
    header = ["model_id"] + [c.label for c in table.columns]
    rows = [
        [row.model_id] + [row.cells[c.label] for c in table.columns]
        for row in table.rows
    ]
    return header, rows


def emit(table: ComparisonTable | RankTable, format: str = CSV_FORMAT) -> str:
    """Serialize a table; same table and format always gives identical bytes."""
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {format!r} (expected one of {', '.join(REPORT_FORMATS)})")

    if isinstance(table, ComparisonTable):
        if format == JSON_FORMAT:
            doc = {
                "kind": "comparison",
                "group_by": list(table.group_by),
                "metrics": list(table.metrics),
                "rows": [
                    {
                        "key": dict(zip(table.group_by, row.key)),
                        "cells": {
                            metric: {
                                "mean": row.cells[metric].mean,
                                "ci_low": row.cells[metric].ci_low,
                                "ci_high": row.cells[metric].ci_high,
                                "n": row.cells[metric].n,
                                "std_dev": row.cells[metric].std_dev,
                                "formatted": format_interval(
                                    row.cells[metric], decimals_for(metric)
                                ),
                            }
                            for metric in table.metrics
                        },
                    }
                    for row in table.rows
                ],
            }
            return json.dumps(doc, indent=2, sort_keys=True) + "\n"
        header, rows = _comparison_cells(table)
    else:
        if format == JSON_FORMAT:
            doc = {
                "kind": "ranking",
                "devices": list(table.devices),
                "columns": [
                    {"metric": c.metric, "direction": c.direction, "label": c.label}
                    for c in table.columns
                ],
                "rows": [
                    {"model_id": row.model_id, "cells": dict(row.cells)}
                    for row in table.rows
                ],
            }
            return json.dumps(doc, indent=2, sort_keys=True) + "\n"
        header, rows = _rank_cells(table)

    if format == CSV_FORMAT:
        return _csv_text(header, rows)
    return _markdown_text(header, rows)
