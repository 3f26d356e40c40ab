"""Top-level acceptance gate.

One test per release criterion. Each test times itself against the
criterion's runtime budget and prints a single [PASS]/[FAIL] line (visible
with ``pytest -s``, and in the captured output on failure); the assertions
encode the required tolerances exactly.
"""

from __future__ import annotations

import itertools
import math
import random
import shutil
import subprocess
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from edgebench.metrics import aggregate, f1_score, t_quantile
from edgebench.orchestrator import (
    CommandRunner,
    MeterSpec,
    SweepSpec,
    SyntheticRunner,
    collect_events,
    execute_run,
    execute_sweep,
)
from edgebench.protocol import (
    EventKind,
    RunConfig,
    RunnerEvent,
    extract_predictions,
    validate_sequence,
)
from edgebench.report import (
    LOWER_BETTER,
    TIE,
    ComparisonRow,
    ComparisonTable,
    build_comparison,
    format_interval,
    rank_devices,
)
from edgebench.metrics import AggregateMetric
from edgebench.simmeter import parse_profile, synth_trace
from edgebench.synthrunner import SyntheticRunnerSpec
from edgebench.trace import Phase, estimate_baseline, integrate_energy, parse_trace

from conftest import make_phases, make_trace
from oracles import energy_oracle, f1_oracle, grammar_oracle, t_quantile_oracle

REPO_ROOT = Path(__file__).resolve().parent.parent
RUNNER_JS = REPO_ROOT / "runner-ts" / "dist" / "main.js"


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.perf_counter() - start
    if elapsed >= budget_s:
        print(f"[FAIL] {name}: {elapsed:.2f}s exceeded the {budget_s:.0f}s budget")
        pytest.fail(f"{name} exceeded its runtime budget: {elapsed:.2f}s >= {budget_s:.0f}s")
    print(f"[PASS] {name} ({elapsed:.2f}s, budget {budget_s:.0f}s)")


def _config(**overrides) -> RunConfig:
    base = dict(
        model_id="synth", device_id="dev-a", framework_id="fw",
        input_size=128, batch_size=1, dataset_ref="synthetic",
    )
    base.update(overrides)
    return RunConfig(**base)


def test_baseline_fidelity():
    with criterion("baseline fidelity", 1.0):
        profile = parse_profile("baseline=2.0,noise=0,rate=16")
        phases = make_phases(("baseline", 0.0, 3.0), ("inference", 3.0, 8.0))
        trace = synth_trace(profile, phases)
        estimate = estimate_baseline(trace, window_seconds=3.0)
        assert estimate.watts == 2.0
        assert estimate.sample_count == 48


def test_energy_closed_form():
    with criterion("energy vs closed form", 1.0):
        # linear ramp: 0 W to 4 W over 2 s
        ramp_points = [(k / 16.0, 2.0 * (k / 16.0)) for k in range(33)]
        ramp = make_trace(ramp_points)
        expected = float(energy_oracle(ramp_points))
        assert math.isclose(integrate_energy(ramp), expected, rel_tol=1e-12)
        assert math.isclose(integrate_energy(ramp), 4.0, rel_tol=1e-12)

        # piecewise constant: 2 W for 3 s then 5 W for 5 s
        step_points = [
            (k / 16.0, 2.0 if k < 48 else 5.0) for k in range(129)
        ]
        step = make_trace(step_points)
        expected = float(energy_oracle(step_points))
        assert math.isclose(integrate_energy(step), expected, rel_tol=1e-12)


def test_confidence_interval_oracle():
    with criterion("CI and t-quantile vs integration oracle", 5.0):
        agg = aggregate([10.0, 12.0, 14.0])
        assert agg.ci_low == pytest.approx(7.032, abs=1e-2)
        assert agg.ci_high == pytest.approx(16.968, abs=1e-2)

        p = (1.0 + 0.95) / 2.0
        for df in [*range(1, 31), 100, 1000]:
            expected = t_quantile_oracle(df, p)
            assert abs(t_quantile(df, p) - expected) < 1e-3, f"df={df}"


def test_f1_brute_force_oracle():
    with criterion("F1 vs brute-force confusion matrix", 5.0):
        rng = random.Random(99173)
        labels = ["a", "b", "c", "d"]
        for _ in range(500):
            n_pairs = rng.randint(1, 20)
            n_classes = rng.randint(2, 4)
            alphabet = labels[:n_classes]
            pairs = [
                (rng.choice(alphabet), rng.choice(alphabet)) for _ in range(n_pairs)
            ]
            for averaging in ("macro", "micro"):
                assert f1_score(pairs, averaging) == f1_oracle(pairs, averaging)


def test_end_to_end_synthetic_run():
    with criterion("end-to-end synthetic run", 30.0):
        meter = MeterSpec.parse("sim:baseline=2.0,inference=+3.0,rate=16,seed=42")
        runner = SyntheticRunner(
            SyntheticRunnerSpec(dataset_load_s=0.2, model_load_s=0.3, inference_s=5.0)
        )
        sweep = SweepSpec(base_config=_config(), repeats=5, cooling_seconds=0.0)
        result = execute_sweep(sweep, meter, runner)
        assert result.ok
        assert len(result.records) == 5
        for record in result.records:
            assert record.metrics.inference_time_s == pytest.approx(5.0, abs=0.1)
            assert record.metrics.energy_j == pytest.approx(15.0, abs=0.5)
            assert record.metrics.mean_power_w == pytest.approx(3.0, abs=0.1)

        table = build_comparison(result.records)
        cell = table.rows[0].cells["inference_time_s"]
        assert format_interval(cell).startswith("5.00 [")

        fixture = AggregateMetric(mean=85.50, ci_low=84.12, ci_high=86.88, n=5, std_dev=1.0)
        assert format_interval(fixture, 2) == "85.50 [84.12, 86.88]"


def test_ranking_semantics():
    with criterion("ranking winner and tie semantics", 1.0):
        def table(rpi, jetson):
            return ComparisonTable(
                group_by=("device_id", "model_id"),
                metrics=("energy_j",),
                rows=(
                    ComparisonRow(key=("jetson", "m"), cells={"energy_j": jetson}),
                    ComparisonRow(key=("rpi5", "m"), cells={"energy_j": rpi}),
                ),
            )

        disjoint = table(
            AggregateMetric(15.2, 14.9, 15.5, 5, 0.3),
            AggregateMetric(12.1, 11.8, 12.4, 5, 0.3),
        )
        winner = rank_devices(disjoint, "energy_j", LOWER_BETTER)
        assert winner.rows[0].cells["energy_j ↓"] == "jetson"

        overlapping = table(
            AggregateMetric(12.5, 12.0, 13.0, 5, 0.5),
            AggregateMetric(12.1, 11.7, 12.6, 5, 0.5),
        )
        tie = rank_devices(overlapping, "energy_j", LOWER_BETTER)
        assert tie.rows[0].cells["energy_j ↓"] == TIE


def test_sweep_cardinality_and_determinism():
    with criterion("sweep cardinality and 1e-9 reproducibility", 60.0):
        meter = MeterSpec.parse("sim:baseline=2.0,inference=+3.0,noise=0.05,rate=16,seed=42")
        runner = SyntheticRunner(
            SyntheticRunnerSpec(dataset_load_s=0.2, model_load_s=0.3, inference_s=5.0)
        )
        spec = SweepSpec(
            base_config=_config(),
            grid={"batch_size": (1, 4), "input_size": (128, 256)},
            repeats=2,
            cooling_seconds=0.0,
        )
        first = execute_sweep(spec, meter, runner)
        assert len(first.records) == 8
        expected_order = [
            (c.batch_size, c.input_size, c.repeat_index) for c in spec.expand()
        ]
        got_order = [
            (r.config.batch_size, r.config.input_size, r.config.repeat_index)
            for r in first.records
        ]
        assert got_order == expected_order

        second = execute_sweep(spec, meter, runner)
        for a, b in zip(first.records, second.records):
            for name in (
                "inference_time_s", "summed_power_w", "mean_power_w",
                "energy_j", "peak_memory_mb", "f1_percent",
            ):
                va, vb = getattr(a.metrics, name), getattr(b.metrics, name)
                if va is None or vb is None:
                    assert va == vb
                else:
                    assert abs(va - vb) <= 1e-9, name


def test_protocol_recognizer_exhaustive():
    with criterion("protocol recognizer vs brute force", 5.0):
        phase_names = tuple(p.value for p in Phase)
        checked = 0
        for k in range(6):
            for combo in itertools.product(phase_names, repeat=k):
                stream = [("hello", None)]
                for name in combo:
                    stream.append(("phase_start", name))
                    stream.append(("phase_end", name))
                stream.append(("done", None))
                events = [
                    RunnerEvent(
                        kind=EventKind(kind),
                        phase=Phase(phase) if phase else None,
                    )
                    for kind, phase in stream
                ]
                times = [float(i + 1) for i in range(len(stream))]
                try:
                    validate_sequence(events, times)
                    accepted = True
                except Exception:
                    accepted = False
                assert accepted == grammar_oracle(stream), combo
                checked += 1
        assert checked == 1365


# --- secondary component ----------------------------------------------------

def _require_reference_runner() -> list[str]:
    node = shutil.which("node")
    if node is None:
        pytest.fail("node is not installed; the reference runner cannot be exercised")
    if not RUNNER_JS.exists():
        pytest.fail(
            f"reference runner not built at {RUNNER_JS}; "
            "run `npm install && npm run build` in runner-ts/"
        )
    return [node, str(RUNNER_JS)]


def test_reference_runner_conformance_and_sweep():
    with criterion("reference runner conformance + monotone sweep", 60.0):
        base_argv = _require_reference_runner()
        rng = random.Random(424242)

        # protocol conformance over a randomized config corpus
        sessions = 0
        for i in range(100):
            n_inputs = rng.randint(1, 5)
            argv = base_argv + [
                "--n-inputs", str(n_inputs),
                "--error-rate", rng.choice(["0", "0.3", "1"]),
                "--dataset-load-s", "0.01",
                "--model-load-s", "0.01",
                "--spin-per-input-unit", "0",
            ]
            config = _config(
                model_id=f"model-{rng.randint(0, 99)}",
                device_id=f"dev-{rng.randint(0, 9)}",
                input_size=rng.randint(1, 64),
                batch_size=rng.randint(1, 4),
                token_window=rng.choice([None, 128, 2048]),
                seed=rng.randint(0, 2**31),
                baseline_seconds=0.02,
            )
            events, receipts = collect_events(argv, config, timeout_s=20)
            log = validate_sequence(events, receipts)
            assert log.has(Phase.BASELINE)
            assert log.has(Phase.INFERENCE)
            assert len(extract_predictions(events)) == n_inputs
            sessions += 1
        assert sessions == 100

        # determinism: identical config + seed, identical predictions
        argv = base_argv + [
            "--n-inputs", "6", "--error-rate", "0.5",
            "--dataset-load-s", "0.01", "--model-load-s", "0.01",
            "--spin-per-input-unit", "0",
        ]
        config = _config(seed=777, baseline_seconds=0.02)
        first, _ = collect_events(argv, config, timeout_s=20)
        second, _ = collect_events(argv, config, timeout_s=20)
        assert extract_predictions(first) == extract_predictions(second)

        # unknown dataset -> fatal event and nonzero exit
        proc = subprocess.run(
            argv, input='{"model_id": "m", "device_id": "d", "framework_id": "f", '
            '"input_size": 8, "batch_size": 1, "dataset_ref": "imagenet", '
            '"seed": 0, "repeat_index": 0, "baseline_seconds": 0.01}\n',
            capture_output=True, text=True, timeout=20,
        )
        assert proc.returncode != 0
        assert '"fatal"' in proc.stdout

        # harness-driven sweep: inference time strictly increases with input size
        runner = CommandRunner(tuple(base_argv + [
            "--n-inputs", "8",
            "--dataset-load-s", "0.02",
            "--model-load-s", "0.02",
        ]))
        meter = MeterSpec.parse("sim:baseline=2.0,inference=+3.0,rate=64,seed=7")
        spec = SweepSpec(
            base_config=_config(baseline_seconds=0.3),
            grid={"input_size": (25, 100, 200)},
            repeats=3,
            cooling_seconds=0.0,
        )
        result = execute_sweep(spec, meter, runner, timeout_s=30.0)
        assert result.ok, [f.error for f in result.failures]
        assert len(result.records) == 9

        table = build_comparison(
            result.records, group_by=("input_size",), metrics=("inference_time_s",)
        )
        means = [row.cells["inference_time_s"].mean for row in table.rows]
        assert [row.key[0] for row in table.rows] == [25, 100, 200]
        assert means[0] < means[1] < means[2], means
