"""Architectural faults and simulator-level error types."""

from __future__ import annotations

import enum


class FaultKind(enum.Enum):
    SECURE_FAULT = "SecureFault"
    DATA_BUS_ERROR = "DataBusError"
    ACHILLES_HEEL_ABORT = "AchillesHeelAbort"
    UNMAPPED_ERROR = "UnmappedError"


class FaultSource(enum.Enum):
    SAU = "SAU"
    AHB = "AHB"
    ENTRY_CHECK = "EntryCheck"
    SIMULATOR = "Simulator"


# Each fault kind is raised by exactly one unit; the pairing never varies.
_SOURCE_FOR_KIND = {
    FaultKind.SECURE_FAULT: FaultSource.SAU,
    FaultKind.DATA_BUS_ERROR: FaultSource.AHB,
    FaultKind.ACHILLES_HEEL_ABORT: FaultSource.ENTRY_CHECK,
    FaultKind.UNMAPPED_ERROR: FaultSource.SIMULATOR,
}


class Fault(Exception):
    """An access or transition refused by the simulated hardware.

    The raising unit (``source``) is derived from ``kind``, so the two can
    never disagree.
    """

    def __init__(self, kind: FaultKind, at: int | None = None, detail: str = ""):
        self.kind = kind
        self.source = _SOURCE_FOR_KIND[kind]
        self.at = at
        self.detail = detail
        where = f" at 0x{at:08X}" if at is not None else ""
        text = f"{kind.value}({self.source.value}){where}"
        if detail:
            text = f"{text}: {detail}"
        super().__init__(text)


class SimError(Exception):
    """Base class for simulator errors that are not architectural faults."""


class OverlapError(SimError):
    pass


class BoundsError(SimError):
    pass


class ConfigError(SimError):
    pass


class StateError(SimError):
    pass


class InputDataError(SimError):
    """Entry-function input rejected before any work was done."""


class PoolExhausted(SimError):
    pass


class ProtocolMaxExceeded(SimError):
    pass


class PoolBoundsError(SimError):
    """Request would touch memory outside the shared secure pool."""


class AccountingError(SimError):
    """Response shorter than expected; an anomaly, not a negative leak."""


class UnknownApp(SimError):
    pass


class DoubleFree(SimError):
    pass


class MitigationBlocked(SimError):
    """A request refused by the mitigation layer before it could leak."""

    def __init__(self, reason: str, error_id: int | None = None):
        self.reason = reason
        self.error_id = error_id
        super().__init__(reason)
