from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from edgebench.service import create_app

from test_manifest_cli import base_doc


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def _wait_done(client, campaign_id, timeout_s=30.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        body = client.get(f"/campaigns/{campaign_id}").json()
        if body["status"] != "running":
            return body
        time.sleep(0.02)
    raise AssertionError("campaign did not finish in time")


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]


class TestTraceAnalyze:
    def test_baseline_only(self, client):
        text = "\n".join(f"{k / 16.0},1.5" for k in range(64))
        response = client.post(
            "/trace/analyze",
            json={"text": text, "baseline_window_s": 3.0},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["sample_count"] == 64
        assert body["baseline"]["watts"] == 1.5
        assert body["baseline"]["sample_count"] == 48
        assert body["phases"] is None

    def test_with_phase_metrics(self, client):
        rows = []
        for k in range(16 * 8):
            t = k / 16.0
            rows.append(f"{t},{2.0 if t < 3.0 else 5.0}")
        response = client.post(
            "/trace/analyze",
            json={
                "text": "\n".join(rows),
                "phases": [
                    {"phase": "baseline", "start": 0.0, "end": 3.0},
                    {"phase": "inference", "start": 3.0, "end": 8.0},
                ],
            },
        )
        assert response.status_code == 200
        phases = {p["phase"]: p for p in response.json()["phases"]}
        inference = phases["inference"]
        assert inference["duration_s"] == 5.0
        assert inference["mean_power_w"] == pytest.approx(3.0)
        assert inference["energy_j"] == pytest.approx(15.0, abs=0.5)
        assert phases["baseline"]["mean_power_w"] == pytest.approx(0.0)

    def test_va_format(self, client):
        response = client.post(
            "/trace/analyze",
            json={"text": "0.0,5.0,0.4\n1.0,5.0,0.4", "format": "va", "baseline_window_s": 2.0},
        )
        assert response.status_code == 200
        assert response.json()["baseline"]["watts"] == pytest.approx(2.0)

    def test_malformed_trace_is_422(self, client):
        response = client.post("/trace/analyze", json={"text": "garbage here"})
        assert response.status_code == 422
        assert "line 1" in response.json()["detail"]

    def test_bad_phase_name_is_422(self, client):
        response = client.post(
            "/trace/analyze",
            json={
                "text": "0.0,1.0\n5.0,1.0",
                "baseline_window_s": 1.0,
                "phases": [{"phase": "warmup", "start": 0.0, "end": 1.0}],
            },
        )
        assert response.status_code == 422


class TestMetricsEndpoints:
    def test_aggregate(self, client):
        response = client.post("/metrics/aggregate", json={"values": [10, 12, 14]})
        assert response.status_code == 200
        body = response.json()
        assert body["mean"] == 12.0
        assert body["n"] == 3
        assert body["ci_low"] == pytest.approx(7.032, abs=0.01)
        assert body["ci_high"] == pytest.approx(16.968, abs=0.01)
        assert body["formatted"] == "12.00 [7.03, 16.97]"

    def test_aggregate_empty_is_422(self, client):
        assert client.post("/metrics/aggregate", json={"values": []}).status_code == 422

    def test_aggregate_bad_confidence_is_422(self, client):
        response = client.post(
            "/metrics/aggregate", json={"values": [1.0, 2.0], "confidence": 1.5}
        )
        assert response.status_code == 422

    def test_f1_macro_and_micro(self, client):
        pairs = [["a", "a"], ["b", "a"], ["b", "b"], ["c", "b"], ["c", "c"]]
        macro = client.post("/metrics/f1", json={"pairs": pairs}).json()
        assert macro["averaging"] == "macro"
        assert macro["f1_percent"] == pytest.approx(61.11, abs=0.01)
        micro = client.post(
            "/metrics/f1", json={"pairs": pairs, "averaging": "micro"}
        ).json()
        assert micro["f1_percent"] == pytest.approx(60.0)

    def test_f1_empty_is_422(self, client):
        assert client.post("/metrics/f1", json={"pairs": []}).status_code == 422


class TestCampaigns:
    def _doc(self, tmp_path, **overrides):
        doc = base_doc(**overrides)
        doc["output_dir"] = str(tmp_path / "out")
        return doc

    def test_lifecycle(self, client, tmp_path):
        response = client.post("/campaigns", json=self._doc(tmp_path))
        assert response.status_code == 201
        created = response.json()
        assert created["status"] == "running"
        assert created["total_runs"] == 4

        final = _wait_done(client, created["id"])
        assert final["status"] == "completed"
        assert final["completed_runs"] == 4
        assert final["failed_runs"] == 0
        assert (tmp_path / "out" / "run_0003.json").exists()
        assert (tmp_path / "out" / "campaign.json").exists()
        assert (tmp_path / "out" / "comparison.csv").exists()

    def test_report_after_completion(self, client, tmp_path):
        created = client.post("/campaigns", json=self._doc(tmp_path)).json()
        _wait_done(client, created["id"])

        response = client.get(
            f"/campaigns/{created['id']}/report",
            params={"kind": "comparison", "format": "csv"},
        )
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/csv")
        assert response.text.splitlines()[0].startswith("device_id,model_id")

        markdown = client.get(f"/campaigns/{created['id']}/report")
        assert markdown.status_code == 200
        assert markdown.text.startswith("| device_id |")

    def test_ranking_404_for_single_device(self, client, tmp_path):
        created = client.post("/campaigns", json=self._doc(tmp_path)).json()
        _wait_done(client, created["id"])
        response = client.get(
            f"/campaigns/{created['id']}/report", params={"kind": "ranking"}
        )
        assert response.status_code == 404

    def test_failed_campaign_reports_409(self, client, tmp_path):
        doc = self._doc(tmp_path)
        doc["config"]["dataset_ref"] = "imagenet"
        created = client.post("/campaigns", json=doc).json()
        final = _wait_done(client, created["id"])
        # all cells fail; campaign completes with failures recorded
        assert final["failed_runs"] == 4
        response = client.get(f"/campaigns/{created['id']}/report")
        assert response.status_code == 404  # no records to report on

    def test_bad_manifest_is_422(self, client, tmp_path):
        doc = self._doc(tmp_path, meter="usb")
        response = client.post("/campaigns", json=doc)
        assert response.status_code == 422
        assert "meter" in response.json()["detail"]

    def test_unknown_campaign_404(self, client):
        assert client.get("/campaigns/abcdef").status_code == 404
        assert client.get("/campaigns/abcdef/report").status_code == 404

    def test_listing(self, client, tmp_path):
        assert client.get("/campaigns").json() == []
        created = client.post("/campaigns", json=self._doc(tmp_path)).json()
        _wait_done(client, created["id"])
        listed = client.get("/campaigns").json()
        assert [c["id"] for c in listed] == [created["id"]]

    def test_manifest_echo_in_campaign_json(self, client, tmp_path):
        doc = self._doc(tmp_path)
        created = client.post("/campaigns", json=doc).json()
        _wait_done(client, created["id"])
        stored = json.loads((tmp_path / "out" / "campaign.json").read_text(encoding="utf-8"))
        assert stored["manifest"] == doc
