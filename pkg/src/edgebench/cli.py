"""Command-line entry point.

Thin argument-parsing layer over the library: ``run`` executes a campaign
manifest, ``analyze`` rebuilds metrics and reports from stored evidence,
``trace`` exposes the trace analysis primitives on files, ``replay``
streams a recorded trace, and ``serve`` starts the HTTP service.

Exit codes: 0 success, 1 measurement or verification failure, 2 bad
input (manifest, trace file or usage).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import (
    EdgebenchError,
    InsufficientDevices,
    ManifestError,
    StorageError,
    TraceError,
)
from .manifest import CampaignManifest, load_manifest
from .orchestrator import (
    RunRecord,
    SweepFailure,
    execute_sweep,
    recompute_metrics,
)
from .report import (
    REPORT_FORMATS,
    build_comparison,
    build_ranking,
    emit,
    format_number,
)
from .simmeter import replay_trace
from .store import iter_run_files, load_run, save_campaign
from .trace import (
    Phase,
    PhaseInterval,
    PhaseLog,
    TRACE_FORMATS,
    estimate_baseline,
    integrate_energy,
    parse_trace,
    serialize_trace,
    slice_by_phase,
)

_REPORT_EXT = {"csv": "csv", "json": "json", "markdown": "md"}


def _fail(message: str) -> None:
    print(f"edgebench: {message}", file=sys.stderr)


def _progress_line(index: int, total: int, outcome: RunRecord | SweepFailure) -> str:
    prefix = f"[{index + 1}/{total}]"
    config = outcome.config
    ident = (
        f"model={config.model_id} device={config.device_id} "
        f"input_size={config.input_size} batch_size={config.batch_size} "
        f"repeat={config.repeat_index}"
    )
    if isinstance(outcome, SweepFailure):
        return f"{prefix} FAIL {ident}: {outcome.error_type}: {outcome.error}"
    m = outcome.metrics
    parts = [
        f"time={format_number(m.inference_time_s, 2)}s",
        f"energy={format_number(m.energy_j, 2)}J",
        f"power={format_number(m.mean_power_w, 2)}W",
        f"mem={format_number(m.peak_memory_mb, 0)}MB",
    ]
    if m.f1_percent is not None:
        parts.append(f"f1={format_number(m.f1_percent, 2)}")
    return f"{prefix} ok   {ident} " + " ".join(parts)


def _write_reports(
    records,
    group_by,
    formats,
    directory: Path,
) -> list[Path]:
    written = []
    comparison = build_comparison(records, group_by=group_by)
    tables = [("comparison", comparison)]
    try:
        tables.append(("ranking", build_ranking(comparison)))
    except InsufficientDevices:
        print("ranking skipped: campaign covers fewer than 2 devices")
    except ValueError:
        # group_by carries sweep parameters; rank on device x model only
        try:
            tables.append(("ranking", build_ranking(
                build_comparison(records, group_by=("device_id", "model_id"))
            )))
        except InsufficientDevices:
            print("ranking skipped: campaign covers fewer than 2 devices")
    for stem, table in tables:
        for fmt in formats:
            path = directory / f"{stem}.{_REPORT_EXT[fmt]}"
            path.write_text(emit(table, fmt), encoding="utf-8")
            written.append(path)
    return written


def _apply_overrides(manifest: CampaignManifest, args) -> CampaignManifest:
    sweep = manifest.sweep
    base = sweep.base_config
    if args.seed is not None:
        base = replace(base, seed=args.seed)
    changed = {}
    if args.repeats is not None:
        changed["repeats"] = args.repeats
    if args.cooling is not None:
        changed["cooling_seconds"] = args.cooling
    try:
        sweep = replace(sweep, base_config=base, **changed)
    except ValueError as exc:
        raise ManifestError(str(exc)) from None
    out = manifest.output_dir
    env_out = os.environ.get("EDGEBENCH_OUT")
    if env_out:
        out = Path(env_out)
    if args.out is not None:
        out = Path(args.out)
    formats = tuple(args.format) if args.format else manifest.report_formats
    return replace(manifest, sweep=sweep, output_dir=out, report_formats=formats)


def cmd_run(args) -> int:
    try:
        manifest = _apply_overrides(load_manifest(args.manifest), args)
        raw_doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except ManifestError as exc:
        _fail(str(exc))
        return 2

    total = manifest.sweep.cell_count()
    print(f"campaign {manifest.name}: {total} run(s) -> {manifest.output_dir}")

    def on_progress(index, total, outcome):
        print(_progress_line(index, total, outcome))

    result = execute_sweep(
        manifest.sweep,
        manifest.meter,
        manifest.runner,
        abort_on_error=not args.keep_going,
        on_progress=on_progress,
    )
    save_campaign(manifest.output_dir, result, manifest=raw_doc)
    if result.records:
        _write_reports(
            result.records, manifest.group_by, manifest.report_formats, manifest.output_dir
        )
    print(
        f"done: {len(result.records)} succeeded, {len(result.failures)} failed, "
        f"records in {manifest.output_dir}"
    )
    if result.failures and not args.keep_going:
        return 1
    return 0


def _group_by_from_campaign(records, manifest_doc) -> tuple[str, ...]:
    if manifest_doc:
        grid = manifest_doc.get("sweep", {}).get("grid", {})
        if isinstance(grid, dict):
            return ("device_id", "model_id") + tuple(sorted(grid))
    varying = tuple(
        name
        for name in ("input_size", "batch_size", "token_window")
        if len({getattr(r.config, name) for r in records}) > 1
    )
    return ("device_id", "model_id") + varying


def cmd_analyze(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        _fail(f"{directory} is not a directory")
        return 2
    run_files = list(iter_run_files(directory))
    if not run_files:
        _fail(f"no run records found in {directory}")
        return 2

    records = []
    for path in run_files:
        try:
            record = load_run(path)
        except StorageError as exc:
            _fail(str(exc))
            return 2
        fresh = recompute_metrics(record)
        if fresh != record.metrics:
            _fail(
                f"metrics mismatch in {path.name}: stored {record.metrics}, "
                f"recomputed {fresh}"
            )
            return 1
        records.append(record)

    manifest_doc = None
    campaign_path = directory / "campaign.json"
    if campaign_path.exists():
        try:
            manifest_doc = json.loads(campaign_path.read_text(encoding="utf-8")).get("manifest")
        except (OSError, json.JSONDecodeError) as exc:
            _fail(f"cannot read {campaign_path}: {exc}")
            return 2

    formats = tuple(args.format) if args.format else REPORT_FORMATS
    group_by = _group_by_from_campaign(records, manifest_doc)
    written = _write_reports(records, group_by, formats, directory)
    print(f"verified {len(records)} record(s); wrote {len(written)} report file(s)")
    for path in written:
        print(f"  {path}")
    return 0


def _load_phases(path: str) -> PhaseLog:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict) and "phases" in doc:
        doc = doc["phases"]
    entries = tuple(
        PhaseInterval(Phase(e["phase"]), float(e["start"]), float(e["end"]))
        for e in doc
    )
    return PhaseLog(entries)


def cmd_trace(args) -> int:
    try:
        text = Path(args.file).read_text(encoding="utf-8")
        trace = parse_trace(text, fmt=args.input_format, nominal_rate_hz=args.rate)
    except OSError as exc:
        _fail(f"cannot read {args.file}: {exc}")
        return 2
    except TraceError as exc:
        _fail(str(exc))
        return 2

    try:
        if args.subcommand == "baseline":
            estimate = estimate_baseline(trace, window_seconds=args.window)
            print(format_number(estimate.watts))
        elif args.subcommand == "energy":
            print(format_number(integrate_energy(trace)))
        else:  # slice
            if not args.phases:
                _fail("trace slice requires --phases <file> with the phase log")
                return 2
            try:
                phases = _load_phases(args.phases)
            except (OSError, ValueError, KeyError, TypeError) as exc:
                _fail(f"cannot load phase log {args.phases}: {exc}")
                return 2
            sliced = slice_by_phase(trace, phases, Phase(args.phase))
            sys.stdout.write(serialize_trace(sliced))
    except EdgebenchError as exc:
        _fail(str(exc))
        return 2
    return 0


def cmd_replay(args) -> int:
    try:
        for sample in replay_trace(args.file, speed=args.speed):
            print(f"{sample.t!r},{sample.watts!r}")
    except OSError as exc:
        _fail(f"cannot read {args.file}: {exc}")
        return 2
    except TraceError as exc:
        _fail(str(exc))
        return 2
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgebench",
        description="Phase-synchronized power, latency and memory benchmarking of an external inference runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a campaign manifest")
    p_run.add_argument("manifest", help="path to the campaign manifest JSON")
    p_run.add_argument("--keep-going", action="store_true", help="continue after failed cells and exit 0")
    p_run.add_argument("--repeats", type=int, default=None, help="override repeats per cell")
    p_run.add_argument("--cooling", type=float, default=None, help="override cooling seconds between runs")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_run.add_argument("--out", default=None, help="override the output directory")
    p_run.add_argument(
        "--format", action="append", choices=REPORT_FORMATS, default=None,
        help="report format (repeatable; default from manifest)",
    )
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="recompute metrics and reports from stored records")
    p_an.add_argument("directory", help="campaign directory with run_*.json records")
    p_an.add_argument(
        "--format", action="append", choices=REPORT_FORMATS, default=None,
        help="report format (repeatable; default all)",
    )
    p_an.set_defaults(func=cmd_analyze)

    p_tr = sub.add_parser("trace", help="analyze a power trace file")
    p_tr.add_argument("subcommand", choices=("baseline", "energy", "slice"))
    p_tr.add_argument("file", help="trace file (t,watts or t,volts,amps per line)")
    p_tr.add_argument("--window", type=float, default=3.0, help="baseline window seconds")
    p_tr.add_argument("--input-format", choices=TRACE_FORMATS, default=None)
    p_tr.add_argument("--rate", type=float, default=16.0, help="nominal meter rate in Hz")
    p_tr.add_argument("--phase", default=Phase.INFERENCE.value, help="phase name for slice")
    p_tr.add_argument("--phases", default=None, help="JSON phase log file for slice")
    p_tr.set_defaults(func=cmd_trace)

    p_re = sub.add_parser("replay", help="stream a recorded trace to stdout")
    p_re.add_argument("file", help="trace file to replay")
    p_re.add_argument(
        "--speed", type=float, default=float("inf"),
        help="playback speed multiplier (1.0 = real time; default: no pacing)",
    )
    p_re.set_defaults(func=cmd_replay)

    p_sv = sub.add_parser("serve", help="start the HTTP service")
    p_sv.add_argument("--host", default="127.0.0.1")
    p_sv.add_argument("--port", type=int, default=8000)
    p_sv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EdgebenchError as exc:
        _fail(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
