"""Trusted apps in a shared secure pool and the gateway entry functions.

The pool has no per-app isolation: apps are packed back to back with no guard
bytes, which is exactly what the over-read and overflow scenarios exploit.
Entry functions run with full secure-world memory access; whether they
validate caller-supplied addresses is a per-entry flag.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .faults import (
    ConfigError,
    Fault,
    FaultKind,
    InputDataError,
    PoolBoundsError,
    PoolExhausted,
    ProtocolMaxExceeded,
    StateError,
    UnknownApp,
)
from .execution import ExecutionContext
from .memmap import MemoryMap, SecurityAttr

DEFAULT_MAX_STRING = 128
DEFAULT_PROTOCOL_MAX = 128 * 1024

ACHILLES_HEEL_MESSAGE = "Achilles' Heel exception: String is not located in normal world!"


class EntryHandler(enum.Enum):
    PRINTF = "printf_nse"
    GET_DRAM_DATA = "get_dram_data_nse"
    HEARTBEAT = "heartbeat_nse"


@dataclass(frozen=True)
class VeneerEntry:
    """A non-secure-callable gateway stub: marker address plus input policy."""

    name: str
    address: int
    handler: EntryHandler
    validates_inputs: bool = False


@dataclass(frozen=True)
class TrustedApp:
    """One app's slice of the shared pool. ``payload`` is the bytes installed
    at allocation time; the live pool contents may diverge after overflows."""

    app_id: str
    base: int
    size: int
    payload: bytes


class AppRegistry:
    """Apps packed contiguously in allocation order inside one pool region."""

    def __init__(self, mem: MemoryMap, pool_region: str = "s_ram"):
        self.mem = mem
        self.pool = mem.region_named(pool_region)
        self.apps: list[TrustedApp] = []
        self._by_id: dict[str, TrustedApp] = {}
        self.next_free = self.pool.base

    @property
    def pool_end(self) -> int:
        return self.pool.end

    @property
    def free_bytes(self) -> int:
        return self.pool.end - self.next_free

    def allocate(self, app_id: str, payload: bytes) -> TrustedApp:
        """Place an app at the next free pool address, no guard bytes."""
        if app_id in self._by_id:
            raise ConfigError(f"app id {app_id!r} already allocated")
        if len(payload) > self.free_bytes:
            raise PoolExhausted(
                f"pool has {self.free_bytes} free bytes, need {len(payload)}"
            )
        app = TrustedApp(app_id, self.next_free, len(payload), bytes(payload))
        self.mem.write(app.base, app.payload)
        self.apps.append(app)
        self._by_id[app_id] = app
        self.next_free += app.size
        return app

    def find(self, app_id: str) -> TrustedApp:
        try:
            return self._by_id[app_id]
        except KeyError:
            raise UnknownApp(f"no app {app_id!r} in the pool") from None


def allocate_app(reg: AppRegistry, app_id: str, payload: bytes) -> TrustedApp:
    return reg.allocate(app_id, payload)


def string_length(mem: MemoryMap, str_addr: int, max_len: int) -> int:
    """strnlen-style scan with the usual one-past terminator tolerance.

    A string of exactly ``max_len`` bytes is accepted when the byte at
    ``str_addr + max_len`` is the terminator; otherwise the input is rejected.
    Uses raw (secure-world) reads, so unmapped bytes fault.
    """
    for offset in range(max_len):
        if mem.read(str_addr + offset, 1) == b"\x00":
            return offset
    if mem.read(str_addr + max_len, 1) != b"\x00":
        raise InputDataError(
            "Input data error: String too long or invalid string termination!"
        )
    return max_len


def entry_printf(
    ctx: ExecutionContext,
    mem: MemoryMap,
    entry: VeneerEntry,
    str_addr: int,
    max_len: int = DEFAULT_MAX_STRING,
) -> bytes:
    """Echo a zero-terminated string back to the non-secure caller.

    Runs with full secure-world access, so no attribution fault fires even
    for secure addresses.  When the entry validates its inputs, every byte of
    the string must classify as non-secure or the call aborts.
    """
    if ctx.world is not SecurityAttr.SECURE or not ctx.entered_via_gateway:
        raise StateError("printf entry requires a gateway-entered secure context")
    if ctx.gateway_entry != entry.name:
        raise StateError("context entered through a different gateway entry")
    length = string_length(mem, str_addr, max_len)
    if entry.validates_inputs:
        for addr in range(str_addr, str_addr + length):
            if mem.attribute_lookup(addr).world is not SecurityAttr.NONSECURE:
                raise Fault(
                    FaultKind.ACHILLES_HEEL_ABORT,
                    at=addr,
                    detail=ACHILLES_HEEL_MESSAGE,
                )
    return mem.read(str_addr, length)


def heartbeat(
    reg: AppRegistry,
    victim: str,
    payload: bytes,
    claimed_len: int,
    protocol_max: int = DEFAULT_PROTOCOL_MAX,
) -> bytes:
    """Store an echo request into the victim's buffer and read the claim back.

    The claimed length is never checked against the payload length: the
    response is ``claimed_len`` bytes starting at the victim's base, so an
    inflated claim returns whatever follows in the shared pool.
    """
    app = reg.find(victim)
    if claimed_len > protocol_max:
        raise ProtocolMaxExceeded(
            f"claimed {claimed_len} bytes, protocol maximum is {protocol_max}"
        )
    if app.base + len(payload) > reg.pool_end:
        raise PoolBoundsError("request payload would extend past the pool")
    if app.base + claimed_len > reg.pool_end:
        raise PoolBoundsError("claimed response would extend past the pool")
    reg.mem.write(app.base, bytes(payload))
    return reg.mem.read(app.base, claimed_len)


def moflow_overflow(reg: AppRegistry, attacker: str, data: bytes, overflow: int) -> None:
    """Secure-side write of ``len(data) + overflow`` bytes from the attacker's base.

    The trailing bytes spill into whatever follows the attacker in the pool;
    no fault fires because the writer runs in the secure world and the pool
    has no per-app bounds.  Spill bytes are zero filler so runs reproduce.
    """
    app = reg.find(attacker)
    total = len(data) + overflow
    if app.base + total > reg.pool_end:
        raise PoolBoundsError("overflow would exit the pool region")
    reg.mem.write(app.base, bytes(data) + bytes(overflow))


def get_dram_data(reg: AppRegistry, attacker: str, requested_len: int) -> bytes:
    """Return ``requested_len`` bytes from the attacker's base.

    The gateway call itself is architecturally legal; an over-long request
    simply appends neighbouring apps' bytes to the response.
    """
    app = reg.find(attacker)
    if app.base + requested_len > reg.pool_end:
        raise PoolBoundsError("requested read would exit the pool region")
    return reg.mem.read(app.base, requested_len)
