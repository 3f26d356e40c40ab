"""Exception hierarchy for the harness.

Every error raised by edgebench derives from :class:`EdgebenchError` so
callers can catch the whole family at an orchestration boundary while unit
code raises the precise class.
"""

from __future__ import annotations


class EdgebenchError(Exception):
    """Base class for all edgebench errors."""


# --- trace ingestion / analysis ---------------------------------------------

class TraceError(EdgebenchError):
    pass


class MalformedRow(TraceError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        self.detail = detail
        msg = f"malformed trace row at line {line_no}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NonMonotonicTime(TraceError):
    def __init__(self, line_no: int):
        self.line_no = line_no
        super().__init__(f"timestamp at line {line_no} does not exceed its predecessor")


class EmptyWindow(TraceError):
    pass


class EmptyTrace(TraceError):
    pass


class InsufficientSamples(TraceError):
    pass


class PhaseAbsent(EdgebenchError):
    def __init__(self, phase):
        self.phase = phase
        super().__init__(f"phase {getattr(phase, 'value', phase)!r} not present in phase log")


# --- metrics ----------------------------------------------------------------

class EmptyPredictions(EdgebenchError):
    pass


class NoSamplesInPhase(EdgebenchError):
    pass


class InvalidDf(EdgebenchError):
    pass


class InvalidP(EdgebenchError):
    pass


class EmptyInput(EdgebenchError):
    pass


# --- runner protocol --------------------------------------------------------

class MalformedEvent(EdgebenchError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"malformed runner event: {detail}")


class UnknownKind(EdgebenchError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"unknown event kind {kind!r}")


class ProtocolViolation(EdgebenchError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"protocol violation: {detail}")


class RunnerFailure(EdgebenchError):
    """The runner terminated with a fatal event or died without completing."""


# --- orchestration ----------------------------------------------------------

class MeterFailure(EdgebenchError):
    pass


class RunTimeout(EdgebenchError):
    pass


# --- reporting --------------------------------------------------------------

class EmptyRecords(EdgebenchError):
    pass


class UnknownMetric(EdgebenchError):
    def __init__(self, metric: str, detail: str = ""):
        self.metric = metric
        msg = f"unknown or unavailable metric {metric!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class InsufficientDevices(EdgebenchError):
    pass


# --- configuration ----------------------------------------------------------

class ManifestError(EdgebenchError):
    """Campaign manifest failed to parse or validate."""


class StorageError(EdgebenchError):
    """A stored run or campaign file is missing, unreadable or inconsistent."""
