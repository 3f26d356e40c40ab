"""HTTP service exposing trace analysis, aggregation and campaign execution.

The service wraps the same library the CLI uses. Campaigns run in a
background thread (execution is strictly serial per campaign, matching
the measurement model); clients poll the campaign resource for progress
and fetch rendered reports once it completes.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel, Field

from . import __version__
from .errors import EdgebenchError, InsufficientDevices, ManifestError
from .manifest import parse_manifest
from .metrics import MACRO, aggregate, f1_score
from .orchestrator import SweepFailure, execute_sweep
from .report import (
    build_comparison,
    build_ranking,
    emit,
    format_interval,
)
from .store import save_campaign
from .trace import (
    Phase,
    PhaseInterval,
    PhaseLog,
    estimate_baseline,
    integrate_energy,
    mean_power,
    parse_trace,
    slice_by_phase,
    subtract_baseline,
    summed_power,
)

_MEDIA_TYPES = {"csv": "text/csv", "json": "application/json", "markdown": "text/markdown"}


# --- request / response schemas ---------------------------------------------

class HealthOut(BaseModel):
    status: Literal["ok"] = "ok"
    version: str


class PhaseIn(BaseModel):
    phase: str
    start: float
    end: float


class TraceAnalyzeIn(BaseModel):
    text: str = Field(description="trace file content, one sample per line")
    format: Literal["watts", "va"] | None = None
    nominal_rate_hz: float = 16.0
    baseline_window_s: float = 3.0
    phases: list[PhaseIn] | None = None


class BaselineOut(BaseModel):
    watts: float
    window_seconds: float
    sample_count: int
    dispersion: float


class PhaseMetricsOut(BaseModel):
    phase: str
    duration_s: float
    energy_j: float
    mean_power_w: float
    summed_power_w: float
    negative_fraction: float


class TraceAnalyzeOut(BaseModel):
    sample_count: int
    duration_s: float
    baseline: BaselineOut
    phases: list[PhaseMetricsOut] | None = None


class AggregateIn(BaseModel):
    values: list[float]
    confidence: float = 0.95
    decimals: int = Field(default=2, ge=0)


class AggregateOut(BaseModel):
    mean: float
    ci_low: float
    ci_high: float
    n: int
    std_dev: float
    formatted: str


class F1In(BaseModel):
    pairs: list[tuple[str, str]] = Field(description="(predicted, truth) label pairs")
    averaging: Literal["macro", "micro"] = MACRO


class F1Out(BaseModel):
    f1_percent: float
    averaging: str


class CampaignOut(BaseModel):
    id: str
    name: str
    status: Literal["running", "completed", "failed"]
    completed_runs: int
    total_runs: int
    failed_runs: int
    output_dir: str
    error: str | None = None


# --- campaign registry ------------------------------------------------------

class _Campaign:
    def __init__(self, campaign_id: str, name: str, total: int, output_dir: Path):
        self.id = campaign_id
        self.name = name
        self.status = "running"
        self.completed = 0
        self.failed = 0
        self.total = total
        self.output_dir = output_dir
        self.error: str | None = None
        self.records = []
        self.failures = []

    def snapshot(self) -> CampaignOut:
        return CampaignOut(
            id=self.id,
            name=self.name,
            status=self.status,
            completed_runs=self.completed,
            total_runs=self.total,
            failed_runs=self.failed,
            output_dir=str(self.output_dir),
            error=self.error,
        )


def create_app() -> FastAPI:
    app = FastAPI(
        title="edgebench",
        version=__version__,
        description="Phase-synchronized power, latency and memory benchmarking service.",
    )
    registry: dict[str, _Campaign] = {}
    registry_lock = threading.Lock()

    @app.get("/health", response_model=HealthOut)
    def health() -> HealthOut:
        return HealthOut(version=__version__)

    @app.post("/trace/analyze", response_model=TraceAnalyzeOut)
    def trace_analyze(body: TraceAnalyzeIn) -> TraceAnalyzeOut:
        try:
            trace = parse_trace(
                body.text, fmt=body.format, nominal_rate_hz=body.nominal_rate_hz
            )
            baseline = estimate_baseline(trace, window_seconds=body.baseline_window_s)
            phase_rows = None
            if body.phases is not None:
                log = PhaseLog(
                    tuple(
                        PhaseInterval(Phase(p.phase), p.start, p.end)
                        for p in body.phases
                    )
                )
                subtracted = subtract_baseline(trace, baseline)
                phase_rows = []
                for entry in log.entries:
                    piece = slice_by_phase(subtracted, log, entry.phase)
                    phase_rows.append(
                        PhaseMetricsOut(
                            phase=entry.phase.value,
                            duration_s=entry.duration,
                            energy_j=integrate_energy(piece),
                            mean_power_w=mean_power(piece),
                            summed_power_w=summed_power(piece),
                            negative_fraction=piece.negative_fraction or 0.0,
                        )
                    )
        except (EdgebenchError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return TraceAnalyzeOut(
            sample_count=len(trace.samples),
            duration_s=trace.duration,
            baseline=BaselineOut(
                watts=baseline.watts,
                window_seconds=baseline.window_seconds,
                sample_count=baseline.sample_count,
                dispersion=baseline.dispersion,
            ),
            phases=phase_rows,
        )

    @app.post("/metrics/aggregate", response_model=AggregateOut)
    def metrics_aggregate(body: AggregateIn) -> AggregateOut:
        try:
            agg = aggregate(body.values, confidence=body.confidence)
        except (EdgebenchError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return AggregateOut(
            mean=agg.mean,
            ci_low=agg.ci_low,
            ci_high=agg.ci_high,
            n=agg.n,
            std_dev=agg.std_dev,
            formatted=format_interval(agg, body.decimals),
        )

    @app.post("/metrics/f1", response_model=F1Out)
    def metrics_f1(body: F1In) -> F1Out:
        try:
            value = f1_score(body.pairs, averaging=body.averaging)
        except EdgebenchError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return F1Out(f1_percent=value, averaging=body.averaging)

    def _run_campaign(campaign: _Campaign, manifest, raw_doc: dict) -> None:
        def on_progress(index, total, outcome):
            campaign.completed = index + 1
            if isinstance(outcome, SweepFailure):
                campaign.failed += 1

        try:
            result = execute_sweep(
                manifest.sweep,
                manifest.meter,
                manifest.runner,
                abort_on_error=False,
                on_progress=on_progress,
            )
            save_campaign(manifest.output_dir, result, manifest=raw_doc)
            campaign.records = result.records
            campaign.failures = result.failures
            if result.records:
                comparison = build_comparison(result.records, group_by=manifest.group_by)
                for fmt in manifest.report_formats:
                    ext = "md" if fmt == "markdown" else fmt
                    (manifest.output_dir / f"comparison.{ext}").write_text(
                        emit(comparison, fmt), encoding="utf-8"
                    )
            campaign.status = "completed"
        except Exception as exc:  # keep the thread from dying silently
            campaign.status = "failed"
            campaign.error = str(exc)

    @app.post("/campaigns", response_model=CampaignOut, status_code=201)
    def create_campaign(body: dict) -> CampaignOut:
        try:
            manifest = parse_manifest(body)
        except ManifestError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        campaign_id = uuid.uuid4().hex[:12]
        campaign = _Campaign(
            campaign_id, manifest.name, manifest.sweep.cell_count(), manifest.output_dir
        )
        with registry_lock:
            registry[campaign_id] = campaign
        thread = threading.Thread(
            target=_run_campaign, args=(campaign, manifest, body), daemon=True
        )
        thread.start()
        return campaign.snapshot()

    @app.get("/campaigns", response_model=list[CampaignOut])
    def list_campaigns() -> list[CampaignOut]:
        with registry_lock:
            return [c.snapshot() for c in registry.values()]

    def _get_campaign(campaign_id: str) -> _Campaign:
        with registry_lock:
            campaign = registry.get(campaign_id)
        if campaign is None:
            raise HTTPException(status_code=404, detail=f"no campaign {campaign_id!r}")
        return campaign

    @app.get("/campaigns/{campaign_id}", response_model=CampaignOut)
    def get_campaign(campaign_id: str) -> CampaignOut:
        return _get_campaign(campaign_id).snapshot()

    @app.get("/campaigns/{campaign_id}/report")
    def get_report(
        campaign_id: str,
        kind: Literal["comparison", "ranking"] = "comparison",
        format: Literal["csv", "json", "markdown"] = "markdown",
    ) -> Response:
        campaign = _get_campaign(campaign_id)
        if campaign.status == "running":
            raise HTTPException(status_code=409, detail="campaign still running")
        if campaign.status == "failed":
            raise HTTPException(status_code=409, detail=f"campaign failed: {campaign.error}")
        if not campaign.records:
            raise HTTPException(status_code=404, detail="campaign produced no records")
        comparison = build_comparison(
            campaign.records, group_by=("device_id", "model_id")
        )
        if kind == "comparison":
            table = comparison
        else:
            try:
                table = build_ranking(comparison)
            except InsufficientDevices as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from None
        return PlainTextResponse(emit(table, format), media_type=_MEDIA_TYPES[format])

    return app


app = create_app()
