"""Campaign manifest loading and validation.

A manifest is one JSON document naming the campaign, the runner command,
the meter source, the base workload config, the sweep grid and the output
targets. Validation is by hand so every rejection names the offending
field; the shipped ``docs/manifest.schema.json`` documents the same shape
for editors and CI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

from .errors import ManifestError
from .orchestrator import (
    DEFAULT_COOLING_S,
    DEFAULT_REPEATS,
    CommandRunner,
    MeterSpec,
    RunnerSpec,
    SweepSpec,
    SyntheticRunner,
)
from .protocol import RunConfig
from .report import REPORT_FORMATS
from .synthrunner import SyntheticRunnerSpec

MANIFEST_SCHEMA = "edgebench.manifest/1"

_CONFIG_REQUIRED = ("model_id", "device_id", "framework_id", "input_size", "batch_size", "dataset_ref")
_CONFIG_OPTIONAL = {"token_window": None, "seed": 0, "baseline_seconds": 3.0}
_SYNTH_OPTION_FIELDS = tuple(f.name for f in dataclass_fields(SyntheticRunnerSpec))


@dataclass(frozen=True)
class CampaignManifest:
    name: str
    runner: RunnerSpec
    meter: MeterSpec
    sweep: SweepSpec
    output_dir: Path
    report_formats: tuple[str, ...]

    @property
    def group_by(self) -> tuple[str, ...]:
        """Report row identity: device, model, plus every swept parameter."""
        return ("device_id", "model_id") + tuple(sorted(self.sweep.grid))


def _expect(doc: dict, field: str, kind: type, where: str):
    if field not in doc:
        raise ManifestError(f"{where} is missing required field {field!r}")
    value = doc[field]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ManifestError(f"{where} field {field!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_runner(doc, where: str) -> RunnerSpec:
    if not isinstance(doc, dict):
        raise ManifestError(f"{where} must be an object with a 'kind' field")
    kind = _expect(doc, "kind", str, where)
    if kind == "synthetic":
        options = doc.get("options", {})
        if not isinstance(options, dict):
            raise ManifestError(f"{where} field 'options' must be an object")
        unknown = sorted(set(options) - set(_SYNTH_OPTION_FIELDS))
        if unknown:
            raise ManifestError(
                f"{where} has unknown synthetic option(s) {', '.join(map(repr, unknown))}"
            )
        try:
            return SyntheticRunner(spec=SyntheticRunnerSpec(**options))
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"{where} options invalid: {exc}") from None
    if kind == "command":
        argv = doc.get("argv")
        if not isinstance(argv, list) or not argv or not all(isinstance(a, str) for a in argv):
            raise ManifestError(f"{where} field 'argv' must be a non-empty list of strings")
        return CommandRunner(argv=tuple(argv))
    raise ManifestError(f"{where} field 'kind' must be 'synthetic' or 'command', got {kind!r}")


def _parse_config(doc, where: str) -> RunConfig:
    if not isinstance(doc, dict):
        raise ManifestError(f"{where} must be an object")
    kwargs = {}
    for field in _CONFIG_REQUIRED:
        if field not in doc:
            raise ManifestError(f"{where} is missing required field {field!r}")
        kwargs[field] = doc[field]
    for field, default in _CONFIG_OPTIONAL.items():
        kwargs[field] = doc.get(field, default)
    known = set(_CONFIG_REQUIRED) | set(_CONFIG_OPTIONAL)
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ManifestError(f"{where} has unknown field(s) {', '.join(map(repr, unknown))}")
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where} invalid: {exc}") from None


def _parse_sweep(doc, base_config: RunConfig, where: str) -> SweepSpec:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ManifestError(f"{where} must be an object")
    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        raise ManifestError(f"{where} field 'grid' must be an object of value lists")
    for key, values in grid.items():
        if not isinstance(values, list):
            raise ManifestError(f"{where} grid entry {key!r} must be a list")
    repeats = doc.get("repeats", DEFAULT_REPEATS)
    cooling = doc.get("cooling_seconds", DEFAULT_COOLING_S)
    if not isinstance(repeats, int) or isinstance(repeats, bool):
        raise ManifestError(f"{where} field 'repeats' must be an integer")
    if not isinstance(cooling, (int, float)) or isinstance(cooling, bool):
        raise ManifestError(f"{where} field 'cooling_seconds' must be a number")
    unknown = sorted(set(doc) - {"grid", "repeats", "cooling_seconds"})
    if unknown:
        raise ManifestError(f"{where} has unknown field(s) {', '.join(map(repr, unknown))}")
    try:
        return SweepSpec(
            base_config=base_config,
            grid=grid,
            repeats=repeats,
            cooling_seconds=float(cooling),
        )
    except ValueError as exc:
        raise ManifestError(f"{where} invalid: {exc}") from None


def parse_manifest(doc: dict, base_dir: Path | str = ".") -> CampaignManifest:
    """Validate a decoded manifest document.

    Relative output directories resolve against ``base_dir`` (the
    manifest's own directory when loaded from disk).
    """
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    schema = doc.get("schema", MANIFEST_SCHEMA)
    if schema != MANIFEST_SCHEMA:
        raise ManifestError(f"manifest schema {schema!r} unsupported, expected {MANIFEST_SCHEMA!r}")

    known = {"schema", "name", "runner", "meter", "config", "sweep", "output_dir", "report_formats"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ManifestError(f"manifest has unknown field(s) {', '.join(map(repr, unknown))}")

    name = _expect(doc, "name", str, "manifest")
    if not name:
        raise ManifestError("manifest field 'name' must not be empty")

    meter_raw = _expect(doc, "meter", str, "manifest")
    meter = MeterSpec.parse(meter_raw)

    runner = _parse_runner(doc.get("runner"), "manifest field 'runner'") if "runner" in doc \
        else _missing("runner")
    base_config = _parse_config(doc.get("config"), "manifest field 'config'") if "config" in doc \
        else _missing("config")
    sweep = _parse_sweep(doc.get("sweep"), base_config, "manifest field 'sweep'")

    out_raw = _expect(doc, "output_dir", str, "manifest")
    if not out_raw:
        raise ManifestError("manifest field 'output_dir' must not be empty")
    output_dir = Path(out_raw)
    if not output_dir.is_absolute():
        output_dir = Path(base_dir) / output_dir

    formats_raw = doc.get("report_formats", list(REPORT_FORMATS))
    if not isinstance(formats_raw, list) or not formats_raw:
        raise ManifestError("manifest field 'report_formats' must be a non-empty list")
    for fmt in formats_raw:
        if fmt not in REPORT_FORMATS:
            raise ManifestError(
                f"manifest report format {fmt!r} unknown (expected one of {', '.join(REPORT_FORMATS)})"
            )

    return CampaignManifest(
        name=name,
        runner=runner,
        meter=meter,
        sweep=sweep,
        output_dir=output_dir,
        report_formats=tuple(formats_raw),
    )


def _missing(field: str):
    raise ManifestError(f"manifest is missing required field {field!r}")


def load_manifest(path: Path | str) -> CampaignManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from None
    return parse_manifest(doc, base_dir=path.parent)
