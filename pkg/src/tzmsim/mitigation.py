"""Mitigation layer: boundary verifier, response verifier, leak collector.

Three independent mechanisms force leak-free exchanges: a request gate in the
callable region that refuses argument ranges outside the normal world, a
secure-side verifier that refuses responses exceeding an app's allocation,
and a write-event collector that flags overflows at their source.
``GuardedServices`` packages the service entry points with these checks and
drives the gateway crossings, so the same scenario scripts run with any
combination of mechanisms enabled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from . import services
from .execution import ExecutionContext, gateway_enter, secure_return
from .faults import DoubleFree, MitigationBlocked, UnknownApp
from .memmap import MemoryMap, SecurityAttr
from .services import (
    DEFAULT_MAX_STRING,
    DEFAULT_PROTOCOL_MAX,
    AppRegistry,
    EntryHandler,
    VeneerEntry,
    string_length,
)


@dataclass(frozen=True)
class MitigationConfig:
    boundary: bool = False
    verifier: bool = False
    collector: bool = False

    @classmethod
    def on(cls, *, boundary: bool = True, verifier: bool = True, collector: bool = True) -> MitigationConfig:
        return cls(boundary=boundary, verifier=verifier, collector=collector)

    @classmethod
    def off(cls) -> MitigationConfig:
        return cls()

    @property
    def active(self) -> bool:
        return self.boundary or self.verifier or self.collector


@dataclass(frozen=True)
class BoundaryDecision:
    """Verdict of the callable-region request gate.

    ``error_id`` is the stable error number e_i: the 1-based index of the
    first argument whose range failed the check.
    """

    allowed: bool
    error_id: int | None = None
    checked_range: tuple[int, int] | None = None


def boundary_verify(
    mem: MemoryMap,
    entry: VeneerEntry,
    addr_args: Iterable[tuple[int, int]],
) -> BoundaryDecision:
    """Allow a request only if every (address, length) argument range is
    wholly in the normal world.  Deny is a verdict, not an error: the secure
    world is never entered for denied requests."""
    checked = None
    for index, (addr, size) in enumerate(addr_args, start=1):
        checked = (addr, size)
        for a in range(addr, addr + size):
            if mem.attribute_lookup(a).world is not SecurityAttr.NONSECURE:
                return BoundaryDecision(allowed=False, error_id=index, checked_range=checked)
    return BoundaryDecision(allowed=True, checked_range=checked)


@dataclass(frozen=True)
class AllocEvent:
    app: str
    base: int
    size: int


@dataclass(frozen=True)
class FreeEvent:
    app: str


@dataclass(frozen=True)
class WriteEvent:
    app: str
    start: int
    size: int


@dataclass(frozen=True)
class LeakAlert:
    """A write that left the writer's own allocation."""

    writer: str
    victims: tuple[str, ...]
    overlap_bytes: int


class AllocationLedger:
    """Shadow copy of pool allocations, kept in lockstep with the registry."""

    def __init__(self):
        self.entries: dict[str, tuple[int, int]] = {}
        self._freed: set[str] = set()

    @property
    def live(self) -> int:
        return len(self.entries)


def leak_collect(
    ledger: AllocationLedger, event: AllocEvent | FreeEvent | WriteEvent
) -> LeakAlert | None:
    """Feed one allocation/free/write event through the collector.

    Writes that stay inside the writer's own allocation pass silently; any
    byte outside it raises an alert naming the overlapped victims and how
    many of the written bytes landed in their space.
    """
    if isinstance(event, AllocEvent):
        ledger.entries[event.app] = (event.base, event.size)
        ledger._freed.discard(event.app)
        return None
    if isinstance(event, FreeEvent):
        if event.app in ledger.entries:
            del ledger.entries[event.app]
            ledger._freed.add(event.app)
            return None
        if event.app in ledger._freed:
            raise DoubleFree(f"app {event.app!r} already freed")
        raise UnknownApp(f"free of unknown app {event.app!r}")
    if event.app not in ledger.entries:
        raise UnknownApp(f"write by unknown app {event.app!r}")
    if event.size <= 0:
        return None
    base, size = ledger.entries[event.app]
    lo, hi = event.start, event.start + event.size
    if base <= lo and hi <= base + size:
        return None
    victims = []
    overlap = 0
    for other, (obase, osize) in ledger.entries.items():
        if other == event.app:
            continue
        inter = min(hi, obase + osize) - max(lo, obase)
        if inter > 0:
            victims.append(other)
            overlap += inter
    return LeakAlert(writer=event.app, victims=tuple(victims), overlap_bytes=overlap)


def verifier_check(
    ledger: AllocationLedger, app: str, response_range: tuple[int, int]
) -> bool:
    """True iff the response range lies inside the app's own allocation."""
    if app not in ledger.entries:
        raise UnknownApp(f"app {app!r} not in the allocation ledger")
    base, size = ledger.entries[app]
    start, length = response_range
    return base <= start and start + length <= base + size


class GuardedServices:
    """Service entry points wrapped with the configured mitigation checks.

    Methods accept a non-secure context and drive the gateway crossing
    themselves; with every flag off they reproduce the unguarded behaviour
    exactly.  Refused requests raise MitigationBlocked before any secure
    byte can reach the caller, and the context always returns scrubbed to
    the non-secure world.
    """

    def __init__(
        self,
        mem: MemoryMap,
        registry: AppRegistry,
        veneer: Mapping[EntryHandler, VeneerEntry],
        ledger: AllocationLedger,
        config: MitigationConfig,
        protocol_max: int = DEFAULT_PROTOCOL_MAX,
    ):
        self.mem = mem
        self.registry = registry
        self.veneer = dict(veneer)
        self.ledger = ledger
        self.config = config
        self.protocol_max = protocol_max

    def allocate_app(self, app_id: str, payload: bytes):
        app = self.registry.allocate(app_id, payload)
        leak_collect(self.ledger, AllocEvent(app.app_id, app.base, app.size))
        return app

    def entry_printf(
        self,
        ctx: ExecutionContext,
        str_addr: int,
        max_len: int = DEFAULT_MAX_STRING,
        entry: VeneerEntry | None = None,
    ) -> bytes:
        entry = entry or self.veneer[EntryHandler.PRINTF]
        if self.config.boundary:
            # The request gate runs in the callable region, before the
            # gateway is crossed; a denied request never enters the secure
            # world at all.
            length = string_length(self.mem, str_addr, max_len)
            decision = boundary_verify(self.mem, entry, [(str_addr, length)])
            if not decision.allowed:
                raise MitigationBlocked(
                    f"boundary verifier denied the request (e_{decision.error_id}: "
                    f"argument {decision.error_id} is not in the normal world)",
                    error_id=decision.error_id,
                )
        gateway_enter(ctx, self.mem, entry, 0)
        try:
            echoed = services.entry_printf(ctx, self.mem, entry, str_addr, max_len)
        except BaseException:
            secure_return(ctx, 0)
            raise
        secure_return(ctx, len(echoed))
        return echoed

    def heartbeat(
        self,
        ctx: ExecutionContext,
        victim: str,
        payload: bytes,
        claimed_len: int,
    ) -> bytes:
        entry = self.veneer[EntryHandler.HEARTBEAT]
        gateway_enter(ctx, self.mem, entry, 0)
        try:
            app = self.registry.find(victim)
            if self.config.verifier and not verifier_check(
                self.ledger, victim, (app.base, claimed_len)
            ):
                raise MitigationBlocked(
                    f"verifier refused the response: {claimed_len} bytes exceed "
                    f"the {app.size}-byte allocation of {victim!r}"
                )
            if self.config.collector:
                alert = leak_collect(
                    self.ledger, WriteEvent(victim, app.base, len(payload))
                )
                if alert is not None:
                    raise MitigationBlocked(f"leak collector alert: {alert}")
            response = services.heartbeat(
                self.registry, victim, payload, claimed_len, self.protocol_max
            )
        except BaseException:
            secure_return(ctx, 0)
            raise
        secure_return(ctx, len(response))
        return response

    def get_dram_data(
        self, ctx: ExecutionContext, app_id: str, requested_len: int
    ) -> bytes:
        entry = self.veneer[EntryHandler.GET_DRAM_DATA]
        gateway_enter(ctx, self.mem, entry, 0)
        try:
            app = self.registry.find(app_id)
            if self.config.verifier and not verifier_check(
                self.ledger, app_id, (app.base, requested_len)
            ):
                raise MitigationBlocked(
                    f"verifier refused the response: {requested_len} bytes exceed "
                    f"the {app.size}-byte allocation of {app_id!r}"
                )
            response = services.get_dram_data(self.registry, app_id, requested_len)
        except BaseException:
            secure_return(ctx, 0)
            raise
        secure_return(ctx, len(response))
        return response

    def moflow_overflow(self, attacker: str, data: bytes, overflow: int) -> None:
        # Secure-side internal write; no gateway crossing involved.
        if self.config.collector:
            app = self.registry.find(attacker)
            alert = leak_collect(
                self.ledger, WriteEvent(attacker, app.base, len(data) + overflow)
            )
            if alert is not None:
                raise MitigationBlocked(f"leak collector alert: {alert}")
        services.moflow_overflow(self.registry, attacker, data, overflow)
