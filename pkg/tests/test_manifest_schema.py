"""The shipped manifest schema must agree with the loader's own checks."""

import copy
import json
from pathlib import Path

import jsonschema
import pytest

from edgebench.errors import ManifestError
from edgebench.manifest import parse_manifest

from test_manifest_cli import base_doc

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "docs" / "manifest.schema.json"


@pytest.fixture(scope="module")
def validator():
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


def _schema_ok(validator, doc) -> bool:
    return not list(validator.iter_errors(doc))


def _loader_ok(doc) -> bool:
    try:
        parse_manifest(copy.deepcopy(doc))
    except ManifestError:
        return False
    return True


def _variants():
    yield "valid baseline", base_doc(), True
    doc = base_doc()
    doc["runner"] = {"kind": "command", "argv": ["python3", "-m", "edgebench.synthrunner"]}
    yield "valid command runner", doc, True
    doc = base_doc()
    del doc["schema"]
    yield "valid without schema field", doc, True
    doc = base_doc()
    del doc["sweep"]
    yield "valid without sweep", doc, True
    doc = base_doc()
    doc["report_formats"] = ["json"]
    yield "valid single format", doc, True
    doc = base_doc()
    doc["config"]["token_window"] = 2048
    yield "valid token window", doc, True

    doc = base_doc()
    doc["schema"] = "edgebench.manifest/99"
    yield "wrong schema tag", doc, False
    doc = base_doc()
    doc["turbo"] = True
    yield "unknown top-level field", doc, False
    doc = base_doc()
    del doc["output_dir"]
    yield "missing output_dir", doc, False
    doc = base_doc()
    doc["runner"] = {"kind": "quantum"}
    yield "unknown runner kind", doc, False
    doc = base_doc()
    doc["runner"] = {"kind": "command", "argv": []}
    yield "empty argv", doc, False
    doc = base_doc()
    doc["runner"]["options"]["warmup"] = 1
    yield "unknown synthetic option", doc, False
    doc = base_doc()
    doc["config"]["gpu_id"] = 0
    yield "unknown config field", doc, False
    doc = base_doc()
    doc["config"]["batch_size"] = 0
    yield "zero batch size", doc, False
    doc = base_doc()
    doc["sweep"]["grid"] = {"model_id": ["a", "b"]}
    yield "non-sweepable grid key", doc, False
    doc = base_doc()
    doc["sweep"]["repeats"] = 0
    yield "zero repeats", doc, False
    doc = base_doc()
    doc["report_formats"] = ["pdf"]
    yield "unknown report format", doc, False
    doc = base_doc()
    doc["meter"] = "usb:/dev/ttyUSB0"
    yield "unknown meter scheme", doc, False


@pytest.mark.parametrize(
    "label,doc,expected", list(_variants()), ids=[v[0] for v in _variants()]
)
def test_schema_and_loader_agree(validator, label, doc, expected):
    assert _schema_ok(validator, doc) is expected, f"schema disagrees on: {label}"
    assert _loader_ok(doc) is expected, f"loader disagrees on: {label}"
