"""Execution contexts and the architectural transition rules between worlds.

Models only what the attacks exercise: branch-out transitions that require
scrubbed registers and a cleared address LSB, gateway entries that must land
on the gateway marker, register scrubbing on return, attribute queries, and
attributed word access.  No instruction decoding or exception vectoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .faults import Fault, FaultKind, StateError
from .memmap import AccessKind, EffectiveAttr, MemoryMap, SecurityAttr

if TYPE_CHECKING:
    from .services import VeneerEntry

import enum


class Mode(enum.Enum):
    THREAD = "thread"
    HANDLER = "handler"


GENERAL_REG_COUNT = 13  # r0..r12

WORD_MASK = 0xFFFFFFFF


@dataclass
class ExecutionContext:
    """One simulated core: world, mode, privilege and register state.

    ``scrubbed`` is derived, never stored: it holds exactly when every general
    register is zero.  The world flag changes only through bxns_transition,
    gateway_enter and secure_return.
    """

    world: SecurityAttr = SecurityAttr.SECURE
    mode: Mode = Mode.THREAD
    privileged: bool = True
    regs: list[int] = field(default_factory=lambda: [0] * GENERAL_REG_COUNT)
    lr: int = 0
    pc: int = 0
    msp_s: int = 0
    msp_ns: int = 0
    entered_via_gateway: bool = field(default=False, repr=False)
    gateway_entry: str | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.world not in (SecurityAttr.SECURE, SecurityAttr.NONSECURE):
            raise ValueError("context world must be Secure or NonSecure")
        if len(self.regs) != GENERAL_REG_COUNT:
            raise ValueError(f"expected {GENERAL_REG_COUNT} general registers")

    @property
    def scrubbed(self) -> bool:
        return all(r == 0 for r in self.regs)

    def scrub(self) -> None:
        self.regs = [0] * GENERAL_REG_COUNT


def bxns_transition(ctx: ExecutionContext, mem: MemoryMap, target: int) -> None:
    """Secure-to-non-secure branch.

    Succeeds only when the general registers are scrubbed, the target's least
    significant bit is clear, and the target lies in non-secure memory; any
    violation is a secure fault.  On success the context continues in the
    non-secure world at ``target``.
    """
    if ctx.world is not SecurityAttr.SECURE:
        raise StateError("bxns_transition requires a secure context")
    attr = mem.attribute_lookup(target)
    if not ctx.scrubbed:
        raise Fault(
            FaultKind.SECURE_FAULT, at=target,
            detail="general registers not cleared before leaving the secure world",
        )
    if target & 1:
        raise Fault(
            FaultKind.SECURE_FAULT, at=target,
            detail="least significant bit of the exit target is set",
        )
    if attr.world is not SecurityAttr.NONSECURE:
        raise Fault(
            FaultKind.SECURE_FAULT, at=target,
            detail="exit target is not in non-secure memory",
        )
    ctx.world = SecurityAttr.NONSECURE
    ctx.pc = target


def gateway_enter(
    ctx: ExecutionContext, mem: MemoryMap, entry: VeneerEntry, byte_offset: int = 0
) -> None:
    """Non-secure call into a gateway entry.

    Execution must land exactly on the gateway marker at offset 0 of a
    callable (NSC) address; anything else is a secure fault.
    """
    if ctx.world is not SecurityAttr.NONSECURE:
        raise StateError("gateway_enter requires a non-secure context")
    addr = entry.address + byte_offset
    attr = mem.attribute_lookup(addr)
    if attr.world is not SecurityAttr.NONSECURE_CALLABLE:
        raise Fault(
            FaultKind.SECURE_FAULT, at=addr,
            detail="gateway entry outside a callable region",
        )
    if byte_offset != 0:
        raise Fault(
            FaultKind.SECURE_FAULT, at=addr,
            detail="gateway marker skipped",
        )
    ctx.world = SecurityAttr.SECURE
    ctx.pc = entry.address
    ctx.entered_via_gateway = True
    ctx.gateway_entry = entry.name


def secure_return(ctx: ExecutionContext, retval: int) -> None:
    """Return from a gateway-entered secure call.

    Postcondition: every general register except the return-value register
    (r0) is zero, and the context is back in the non-secure world.
    """
    if ctx.world is not SecurityAttr.SECURE or not ctx.entered_via_gateway:
        raise StateError("secure_return without a matching gateway entry")
    ctx.scrub()
    ctx.regs[0] = retval & WORD_MASK
    ctx.world = SecurityAttr.NONSECURE
    ctx.entered_via_gateway = False
    ctx.gateway_entry = None


def tt_query(ctx: ExecutionContext, mem: MemoryMap, addr: int) -> EffectiveAttr:
    """Attribute query, available from both worlds.

    Non-secure callers learn the world classification only; the bus attribute
    is reported as ``None`` for them.
    """
    attr = mem.attribute_lookup(addr)
    if ctx.world is SecurityAttr.NONSECURE:
        return EffectiveAttr(world=attr.world, bus=None)
    return attr


def _checked_word_access(ctx: ExecutionContext, mem: MemoryMap, addr: int, kind: AccessKind) -> None:
    for i in range(4):
        fault = mem.check_access(ctx.world, addr + i, kind)
        if fault is not None:
            raise fault


def read_word(ctx: ExecutionContext, mem: MemoryMap, addr: int) -> int:
    """Attributed little-endian 32-bit load."""
    _checked_word_access(ctx, mem, addr, AccessKind.READ)
    return int.from_bytes(mem.read(addr, 4), "little")


def write_word(ctx: ExecutionContext, mem: MemoryMap, addr: int, value: int) -> None:
    """Attributed little-endian 32-bit store."""
    _checked_word_access(ctx, mem, addr, AccessKind.WRITE)
    mem.write(addr, (value & WORD_MASK).to_bytes(4, "little"))
