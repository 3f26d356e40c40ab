from __future__ import annotations

import math

import pytest

from edgebench.metrics import MIB, f1_score, peak_memory
from edgebench.protocol import (
    EventKind,
    RunConfig,
    extract_predictions,
    validate_sequence,
)
from edgebench.synthrunner import (
    SyntheticRunnerSpec,
    prediction_pairs,
    script,
)
from edgebench.trace import Phase


def _config(**overrides) -> RunConfig:
    base = dict(
        model_id="synth", device_id="dev", framework_id="fw",
        input_size=100, batch_size=1, dataset_ref="synthetic",
    )
    base.update(overrides)
    return RunConfig(**base)


class TestSpec:
    def test_batch_spans_cover_all_inputs(self):
        spec = SyntheticRunnerSpec(n_inputs=10)
        assert spec.batch_spans(_config(batch_size=4)) == [4, 4, 2]
        assert spec.batch_spans(_config(batch_size=1)) == [1] * 10
        assert spec.batch_spans(_config(batch_size=32)) == [10]

    def test_derived_inference_duration_scales_with_input_size(self):
        spec = SyntheticRunnerSpec(n_inputs=10, per_input_unit_s=1e-3, batch_overhead_s=0.05)
        durations = [spec.inference_duration(_config(input_size=s)) for s in (25, 100, 200)]
        assert durations == sorted(durations)
        assert durations[0] < durations[1] < durations[2]

    def test_fixed_inference_duration_wins(self):
        spec = SyntheticRunnerSpec(inference_s=5.0)
        assert spec.inference_duration(_config(input_size=9999)) == 5.0

    def test_batching_amortizes_overhead(self):
        spec = SyntheticRunnerSpec(n_inputs=10, batch_overhead_s=0.05)
        t1 = spec.inference_duration(_config(batch_size=1))
        t10 = spec.inference_duration(_config(batch_size=10))
        assert t10 < t1

    def test_validation(self):
        with pytest.raises(ValueError):
            SyntheticRunnerSpec(n_inputs=0)
        with pytest.raises(ValueError):
            SyntheticRunnerSpec(error_rate=1.5)
        with pytest.raises(ValueError):
            SyntheticRunnerSpec(n_classes=1)


class TestPredictions:
    def test_deterministic_per_config(self):
        spec = SyntheticRunnerSpec(error_rate=0.3)
        a = prediction_pairs(spec, _config(seed=5))
        b = prediction_pairs(spec, _config(seed=5))
        assert a == b

    def test_seed_and_repeat_change_the_draw(self):
        spec = SyntheticRunnerSpec(n_inputs=50, error_rate=0.3)
        base = prediction_pairs(spec, _config(seed=5))
        assert prediction_pairs(spec, _config(seed=6)) != base
        assert prediction_pairs(spec, _config(seed=5, repeat_index=1)) != base

    def test_zero_error_rate_is_perfect(self):
        spec = SyntheticRunnerSpec(n_inputs=20)
        for _, predicted, truth in prediction_pairs(spec, _config()):
            assert predicted == truth

    def test_error_rate_moves_micro_f1(self):
        # micro-F1 equals accuracy here, so expectation is (1-e)*100
        spec = SyntheticRunnerSpec(n_inputs=1000, error_rate=0.2, n_classes=4)
        pairs = prediction_pairs(spec, _config(seed=123))
        score = f1_score([(p, t) for _, p, t in pairs], averaging="micro")
        assert score == pytest.approx(80.0, abs=3.0)

    def test_labels_come_from_the_class_alphabet(self):
        spec = SyntheticRunnerSpec(n_inputs=30, error_rate=0.5, n_classes=3)
        labels = {"c0", "c1", "c2"}
        for _, predicted, truth in prediction_pairs(spec, _config()):
            assert predicted in labels
            assert truth in labels


class TestScript:
    def test_stream_is_protocol_valid(self):
        events, times, _ = script(SyntheticRunnerSpec(), _config())
        log = validate_sequence(events, times)
        assert log.has(Phase.BASELINE)
        assert log.has(Phase.DATASET_LOAD)
        assert log.has(Phase.MODEL_LOAD)
        assert log.has(Phase.INFERENCE)

    def test_phase_timing_follows_the_spec_fields(self):
        spec = SyntheticRunnerSpec(dataset_load_s=0.2, model_load_s=0.3, inference_s=5.0)
        events, times, _ = script(spec, _config(baseline_seconds=3.0))
        log = validate_sequence(events, times)
        assert log.interval(Phase.BASELINE).start == 0.0
        assert log.interval(Phase.BASELINE).end == 3.0
        assert log.interval(Phase.DATASET_LOAD).end == pytest.approx(3.2)
        assert log.interval(Phase.MODEL_LOAD).end == pytest.approx(3.5)
        inference = log.interval(Phase.INFERENCE)
        assert inference.end - inference.start == pytest.approx(5.0)

    def test_zero_length_load_phases_are_omitted(self):
        spec = SyntheticRunnerSpec(dataset_load_s=0.0, model_load_s=0.0, inference_s=1.0)
        events, times, _ = script(spec, _config())
        log = validate_sequence(events, times)
        assert not log.has(Phase.DATASET_LOAD)
        assert not log.has(Phase.MODEL_LOAD)
        assert log.has(Phase.INFERENCE)

    def test_one_prediction_per_input_inside_inference(self):
        spec = SyntheticRunnerSpec(n_inputs=10, inference_s=5.0)
        events, times, _ = script(spec, _config())
        log = validate_sequence(events, times)
        preds = extract_predictions(events)
        assert len(preds) == 10
        assert [p.input_id for p in preds] == [str(i) for i in range(10)]
        inference = log.interval(Phase.INFERENCE)
        for event, t in zip(events, times):
            if event.kind is EventKind.PREDICTION:
                assert inference.start < t < inference.end

    def test_unknown_dataset_emits_fatal(self):
        events, times, memory = script(SyntheticRunnerSpec(), _config(dataset_ref="imagenet"))
        assert events[0].kind is EventKind.HELLO
        assert events[-1].kind is EventKind.FATAL
        assert "imagenet" in events[-1].message
        assert memory == []

    def test_namespaced_synthetic_dataset_accepted(self):
        events, _, _ = script(SyntheticRunnerSpec(), _config(dataset_ref="synthetic:tiny"))
        assert events[-1].kind is EventKind.DONE

    def test_memory_profile_steps_up_after_loads(self):
        spec = SyntheticRunnerSpec(
            dataset_load_s=0.5, model_load_s=0.5, inference_s=2.0,
            base_memory_mb=96.0, dataset_memory_mb=32.0, model_memory_mb=220.0,
        )
        events, times, memory = script(spec, _config(baseline_seconds=1.0))
        log = validate_sequence(events, times)
        assert memory[0].resident_bytes == int(96.0 * MIB)
        peak = peak_memory(memory, log, Phase.INFERENCE)
        assert peak == pytest.approx(348.0)
        # 4 Hz cadence across the whole run
        assert [s.t for s in memory] == [j / 4.0 for j in range(len(memory))]

    def test_memory_is_monotone_nondecreasing(self):
        _, _, memory = script(SyntheticRunnerSpec(inference_s=1.0), _config())
        values = [s.resident_bytes for s in memory]
        assert values == sorted(values)


class TestSubprocessStub:
    def test_stub_speaks_the_protocol_over_stdio(self):
        import sys

        from edgebench.orchestrator import collect_events

        argv = [
            sys.executable, "-m", "edgebench.synthrunner",
            "--dataset-load-s", "0.05", "--model-load-s", "0.05",
            "--inference-s", "0.2", "--n-inputs", "3",
        ]
        config = _config(baseline_seconds=0.1)
        events, receipts = collect_events(argv, config, timeout_s=30)
        log = validate_sequence(events, receipts)
        assert log.has(Phase.BASELINE)
        assert log.has(Phase.INFERENCE)
        assert len(extract_predictions(events)) == 3
        duration = log.interval(Phase.INFERENCE).end - log.interval(Phase.INFERENCE).start
        assert duration == pytest.approx(0.2, abs=0.15)

    def test_stub_fatal_on_unknown_dataset(self):
        import sys

        from edgebench.orchestrator import collect_events

        argv = [sys.executable, "-m", "edgebench.synthrunner"]
        events, _ = collect_events(argv, _config(dataset_ref="imagenet"), timeout_s=30)
        assert events[-1].kind is EventKind.FATAL
        assert "imagenet" in events[-1].message
