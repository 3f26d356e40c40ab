"""On-disk layout for run records and campaigns.

A campaign directory holds one ``run_NNNN.json`` per completed run, its
power trace as a ``run_NNNN.trace`` text sidecar next to it, and a
``campaign.json`` with the manifest echo and the failure list. Floats go
through ``repr`` round-trips everywhere (both in JSON and in the trace
text format), so a loaded record reproduces the stored one bit for bit.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict
from pathlib import Path
from typing import Iterator

from .errors import StorageError
from .metrics import MemorySample, MetricSet, Prediction
from .orchestrator import RunRecord, SweepFailure, SweepResult
from .protocol import RunConfig, decode_config, encode_config
from .trace import (
    BaselineEstimate,
    Phase,
    PhaseInterval,
    PhaseLog,
    parse_trace,
    serialize_trace,
)

RUN_SCHEMA = "edgebench.run/1"
CAMPAIGN_SCHEMA = "edgebench.campaign/1"

_RUN_FILE = re.compile(r"^run_(\d{4,})\.json$")


def run_basename(index: int) -> str:
    return f"run_{index:04d}"


def save_run(record: RunRecord, directory: Path | str, index: int) -> Path:
    """Write ``run_NNNN.json`` plus its trace sidecar; returns the JSON path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = run_basename(index)
    trace_name = f"{base}.trace"

    doc = {
        "schema": RUN_SCHEMA,
        "config": json.loads(encode_config(record.config)),
        "phases": [
            {"phase": e.phase.value, "start": e.start, "end": e.end}
            for e in record.phases.entries
        ],
        "baseline": asdict(record.baseline),
        "memory": [[s.t, s.resident_bytes] for s in record.memory],
        "predictions": (
            None
            if record.predictions is None
            else [[p.input_id, p.predicted, p.truth] for p in record.predictions]
        ),
        "metrics": asdict(record.metrics),
        "warnings": list(record.warnings),
        "started_at": record.started_at,
        "trace_file": trace_name,
        "trace_meta": {
            "nominal_rate_hz": record.raw_trace.nominal_rate_hz,
            "source_id": record.raw_trace.source_id,
        },
    }

    (directory / trace_name).write_text(serialize_trace(record.raw_trace), encoding="utf-8")
    path = directory / f"{base}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_run(path: Path | str) -> RunRecord:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"cannot read run file {path}: {exc}") from None
    if doc.get("schema") != RUN_SCHEMA:
        raise StorageError(f"{path} has schema {doc.get('schema')!r}, expected {RUN_SCHEMA!r}")

    try:
        config = decode_config(json.dumps(doc["config"]))
        phases = PhaseLog(
            tuple(
                PhaseInterval(Phase(e["phase"]), e["start"], e["end"])
                for e in doc["phases"]
            )
        )
        meta = doc["trace_meta"]
        trace_text = (path.parent / doc["trace_file"]).read_text(encoding="utf-8")
        raw_trace = parse_trace(
            trace_text,
            nominal_rate_hz=meta["nominal_rate_hz"],
            source_id=meta["source_id"],
        )
        baseline = BaselineEstimate(**doc["baseline"])
        memory = tuple(MemorySample(t, resident) for t, resident in doc["memory"])
        predictions = (
            None
            if doc["predictions"] is None
            else tuple(Prediction(*row) for row in doc["predictions"])
        )
        metrics = MetricSet(**doc["metrics"])
        record = RunRecord(
            config=config,
            phases=phases,
            raw_trace=raw_trace,
            baseline=baseline,
            memory=memory,
            metrics=metrics,
            warnings=tuple(doc["warnings"]),
            predictions=predictions,
            started_at=doc["started_at"],
        )
    except StorageError:
        raise
    except Exception as exc:
        raise StorageError(f"run file {path} is inconsistent: {exc}") from None
    return record


def save_campaign(
    directory: Path | str,
    result: SweepResult,
    manifest: dict | None = None,
) -> Path:
    """Write every run record plus ``campaign.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    run_files = []
    for index, record in enumerate(result.records):
        path = save_run(record, directory, index)
        run_files.append(path.name)
    doc = {
        "schema": CAMPAIGN_SCHEMA,
        "manifest": manifest,
        "runs": run_files,
        "failures": [
            {
                "config": json.loads(encode_config(f.config)),
                "error": f.error,
                "error_type": f.error_type,
            }
            for f in result.failures
        ],
    }
    path = directory / "campaign.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def iter_run_files(directory: Path | str) -> Iterator[Path]:
    directory = Path(directory)
    names = sorted(p.name for p in directory.iterdir() if _RUN_FILE.match(p.name))
    for name in names:
        yield directory / name


def load_campaign(directory: Path | str) -> tuple[list[RunRecord], list[SweepFailure], dict | None]:
    """Load all runs in a campaign directory.

    Returns ``(records, failures, manifest)``. Works with or without a
    ``campaign.json``: a bare directory of run files is a valid campaign
    with no manifest and no failures.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise StorageError(f"{directory} is not a directory")
    manifest = None
    failures: list[SweepFailure] = []
    campaign_path = directory / "campaign.json"
    if campaign_path.exists():
        try:
            doc = json.loads(campaign_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageError(f"cannot read {campaign_path}: {exc}") from None
        if doc.get("schema") != CAMPAIGN_SCHEMA:
            raise StorageError(
                f"{campaign_path} has schema {doc.get('schema')!r}, expected {CAMPAIGN_SCHEMA!r}"
            )
        manifest = doc.get("manifest")
        for item in doc.get("failures", []):
            failures.append(
                SweepFailure(
                    config=decode_config(json.dumps(item["config"])),
                    error=item["error"],
                    error_type=item["error_type"],
                )
            )
    records = [load_run(path) for path in iter_run_files(directory)]
    if not records and not failures:
        raise StorageError(f"no run files found in {directory}")
    return records, failures, manifest
