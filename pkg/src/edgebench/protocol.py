"""Wire protocol between the harness and an external inference runner.

Transport is line-delimited JSON: the harness writes one config line to the
runner's stdin; the runner writes one event per line to its stdout. Field
names are part of the contract:

config line
    ``model_id``, ``device_id``, ``framework_id``, ``input_size``,
    ``batch_size``, ``token_window`` (optional), ``dataset_ref``,
    ``repeat_index``, ``seed``, ``baseline_seconds``

event lines
    ``kind`` is one of ``hello``, ``phase_start``, ``phase_end``,
    ``prediction``, ``memory_report``, ``done``, ``fatal``. Phase events
    carry ``phase`` (``baseline`` | ``dataset_load`` | ``model_load`` |
    ``inference``); predictions carry ``input_id``, ``predicted``,
    ``truth``; fatal carries ``message``; memory reports carry
    ``resident_bytes``. ``t_runner`` (seconds on the runner's clock) is
    accepted on any event and kept for diagnostics only: phase timestamps
    in the resulting log come from the harness clock at receipt, because
    the meter and harness share a clock domain and runner clocks are
    unsynchronized.

Unknown fields are ignored for forward compatibility; unknown kinds are an
error. A valid stream is ``hello``, a baseline phase pair, optional
dataset-load and model-load pairs, an inference pair, then ``done`` (or
``fatal`` at any point).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Sequence

from .errors import MalformedEvent, ProtocolViolation, RunnerFailure, UnknownKind
from .metrics import Prediction
from .trace import MANDATORY_PHASES, PHASE_ORDER, Phase, PhaseInterval, PhaseLog


@dataclass(frozen=True)
class RunConfig:
    """One run's workload configuration, sent to the runner as a JSON line.

    ``input_size`` is tokens for language models or pixels-per-side for
    vision models; ``token_window`` applies to language models only.
    ``baseline_seconds`` tells the runner how long to idle inside its
    baseline phase pair.
    """

    model_id: str
    device_id: str
    framework_id: str
    input_size: int
    batch_size: int
    dataset_ref: str
    token_window: int | None = None
    repeat_index: int = 0
    seed: int = 0
    baseline_seconds: float = 3.0

    def __post_init__(self):
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.token_window is not None and self.token_window < 1:
            raise ValueError(f"token_window must be >= 1, got {self.token_window}")
        if self.repeat_index < 0:
            raise ValueError(f"repeat_index must be >= 0, got {self.repeat_index}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.baseline_seconds <= 0:
            raise ValueError(f"baseline_seconds must be > 0, got {self.baseline_seconds}")


class EventKind(str, Enum):
    HELLO = "hello"
    PHASE_START = "phase_start"
    PHASE_END = "phase_end"
    PREDICTION = "prediction"
    MEMORY_REPORT = "memory_report"
    DONE = "done"
    FATAL = "fatal"


TERMINAL_KINDS = (EventKind.DONE, EventKind.FATAL)


@dataclass(frozen=True)
class RunnerEvent:
    """One decoded event line from the runner."""

    kind: EventKind
    phase: Phase | None = None
    t_runner: float | None = None
    input_id: str | None = None
    predicted: str | None = None
    truth: str | None = None
    message: str | None = None
    resident_bytes: int | None = None


def encode_config(config: RunConfig) -> str:
    """One JSON line for the runner's stdin (no trailing newline)."""
    payload = asdict(config)
    if payload["token_window"] is None:
        del payload["token_window"]
    return json.dumps(payload, sort_keys=True)


def decode_config(line: str) -> RunConfig:
    """Inverse of :func:`encode_config`; unknown fields are ignored."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedEvent(f"config line is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise MalformedEvent("config line is not a JSON object")
    known = {
        "model_id", "device_id", "framework_id", "input_size", "batch_size",
        "dataset_ref", "token_window", "repeat_index", "seed", "baseline_seconds",
    }
    kwargs = {k: v for k, v in payload.items() if k in known}
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise MalformedEvent(f"invalid config: {exc}") from None


def encode_event(event: RunnerEvent) -> str:
    """One JSON line for the event stream (no trailing newline)."""
    payload: dict = {"kind": event.kind.value}
    if event.phase is not None:
        payload["phase"] = event.phase.value
    if event.t_runner is not None:
        payload["t_runner"] = event.t_runner
    if event.input_id is not None:
        payload["input_id"] = event.input_id
    if event.predicted is not None:
        payload["predicted"] = event.predicted
    if event.truth is not None:
        payload["truth"] = event.truth
    if event.message is not None:
        payload["message"] = event.message
    if event.resident_bytes is not None:
        payload["resident_bytes"] = event.resident_bytes
    return json.dumps(payload, sort_keys=True)


def decode_event(line: str) -> RunnerEvent:
    """Parse one event line; unknown fields ignored, unknown kinds rejected."""
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedEvent(f"not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise MalformedEvent("event line is not a JSON object")
    if "kind" not in payload:
        raise MalformedEvent("event has no 'kind' field")
    kind_raw = payload["kind"]
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        raise UnknownKind(str(kind_raw)) from None

    phase = None
    if kind in (EventKind.PHASE_START, EventKind.PHASE_END):
        if "phase" not in payload:
            raise MalformedEvent(f"{kind.value} event has no 'phase' field")
        try:
            phase = Phase(payload["phase"])
        except ValueError:
            raise MalformedEvent(f"unknown phase {payload['phase']!r}") from None

    def _opt_str(key: str) -> str | None:
        value = payload.get(key)
        if value is None:
            return None
        return value if isinstance(value, str) else str(value)

    t_runner = payload.get("t_runner")
    if t_runner is not None:
        if not isinstance(t_runner, (int, float)) or isinstance(t_runner, bool):
            raise MalformedEvent(f"t_runner must be a number, got {t_runner!r}")
        t_runner = float(t_runner)

    resident = payload.get("resident_bytes")
    if resident is not None:
        if not isinstance(resident, (int, float)) or isinstance(resident, bool) or resident < 0:
            raise MalformedEvent(f"resident_bytes must be a non-negative number, got {resident!r}")
        resident = int(resident)

    if kind == EventKind.PREDICTION:
        for required in ("input_id", "predicted", "truth"):
            if required not in payload:
                raise MalformedEvent(f"prediction event has no {required!r} field")

    return RunnerEvent(
        kind=kind,
        phase=phase,
        t_runner=t_runner,
        input_id=_opt_str("input_id"),
        predicted=_opt_str("predicted"),
        truth=_opt_str("truth"),
        message=_opt_str("message"),
        resident_bytes=resident,
    )


def validate_sequence(
    events: Sequence[RunnerEvent],
    harness_times: Sequence[float],
) -> PhaseLog:
    """Check a completed event stream and emit its phase log.

    ``harness_times`` are receipt instants on the harness clock, one per
    event. Accepts exactly: hello, baseline pair, optional dataset-load
    pair, optional model-load pair, inference pair, done; prediction and
    memory-report events may appear anywhere in between. Raises
    :class:`RunnerFailure` when the stream was terminated by a fatal
    event and :class:`ProtocolViolation` on any ordering defect.
    """
    if len(events) != len(harness_times):
        raise ValueError("events and harness_times must have equal length")
    if not events:
        raise ProtocolViolation("empty event stream")
    if events[0].kind != EventKind.HELLO:
        raise ProtocolViolation(f"first event must be hello, got {events[0].kind.value}")
    last = events[-1]
    if last.kind == EventKind.FATAL:
        raise RunnerFailure(last.message or "runner reported a fatal error")
    if last.kind != EventKind.DONE:
        raise ProtocolViolation(f"stream not terminated by done, ends with {last.kind.value}")

    intervals: list[PhaseInterval] = []
    open_phase: Phase | None = None
    open_start = 0.0
    seen: set[Phase] = set()
    last_rank = -1

    for idx, (event, t) in enumerate(zip(events[1:-1], harness_times[1:-1]), start=1):
        kind = event.kind
        if kind == EventKind.HELLO:
            raise ProtocolViolation("duplicate hello")
        if kind in TERMINAL_KINDS:
            raise ProtocolViolation(f"{kind.value} before end of stream (event {idx})")
        if kind == EventKind.PHASE_START:
            if open_phase is not None:
                raise ProtocolViolation(
                    f"phase {event.phase.value} started while {open_phase.value} is open"
                )
            if event.phase in seen:
                raise ProtocolViolation(f"phase {event.phase.value} started twice")
            rank = PHASE_ORDER.index(event.phase)
            if rank <= last_rank:
                raise ProtocolViolation(f"phase {event.phase.value} out of canonical order")
            open_phase = event.phase
            open_start = t
            seen.add(event.phase)
            last_rank = rank
        elif kind == EventKind.PHASE_END:
            if open_phase is None:
                raise ProtocolViolation(f"phase_end for {event.phase.value} without a start")
            if event.phase != open_phase:
                raise ProtocolViolation(
                    f"phase_end for {event.phase.value} while {open_phase.value} is open"
                )
            if not t > open_start:
                raise ProtocolViolation(
                    f"phase {event.phase.value} end receipt not after its start"
                )
            intervals.append(PhaseInterval(open_phase, open_start, t))
            open_phase = None
        # prediction / memory_report events need no sequencing checks

    if open_phase is not None:
        raise ProtocolViolation(f"phase {open_phase.value} still open at done")
    missing = MANDATORY_PHASES - seen
    if missing:
        names = ", ".join(sorted(p.value for p in missing))
        raise ProtocolViolation(f"mandatory phase(s) missing: {names}")
    return PhaseLog(tuple(intervals))


def extract_predictions(events: Sequence[RunnerEvent]) -> list[Prediction]:
    """Collect prediction events, in stream order."""
    return [
        Prediction(input_id=e.input_id or "", predicted=e.predicted or "", truth=e.truth or "")
        for e in events
        if e.kind == EventKind.PREDICTION
    ]
