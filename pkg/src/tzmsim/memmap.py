"""Attributed 32-bit physical memory: regions, SAU/IDAU combination, bus checks.

Every address is classified by two attribution units (processor-internal SAU
and vendor-defined IDAU) plus an independent bus-level attribute on the AHB
controller.  The combined "world" of an address decides who may touch it and
which unit faults on an illegal access.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from pathlib import Path

from .faults import BoundsError, ConfigError, Fault, FaultKind, OverlapError

ADDR_SPACE = 1 << 32


class SecurityAttr(enum.IntEnum):
    # Numeric order matters: combination picks the most restrictive value.
    NONSECURE = 0
    NONSECURE_CALLABLE = 1
    SECURE = 2


class BusAttr(enum.Enum):
    NONSECURE = "NS"
    SECURE = "S"


class AccessKind(enum.Enum):
    READ = "read"
    WRITE = "write"
    EXECUTE = "execute"


@dataclass(frozen=True)
class Region:
    name: str
    base: int
    size: int
    sau: SecurityAttr
    idau: SecurityAttr
    ahb: BusAttr

    def __post_init__(self):
        if self.size <= 0:
            raise BoundsError(f"region {self.name!r}: size must be positive")
        if self.base < 0 or self.base + self.size > ADDR_SPACE:
            raise BoundsError(f"region {self.name!r}: exceeds the 32-bit address space")

    @property
    def end(self) -> int:
        """One past the last address of the region."""
        return self.base + self.size

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end


@dataclass(frozen=True)
class EffectiveAttr:
    """Combined security world plus the AHB bus attribute of an address.

    ``bus`` is ``None`` when the attribute was queried from the non-secure
    world, which only learns the world classification.
    """

    world: SecurityAttr
    bus: BusAttr | None


def combine_attrs(sau: SecurityAttr, idau: SecurityAttr) -> SecurityAttr:
    """Most-restrictive combination of the two attribution units.

    Exception: a gateway region is an SAU-marked callable carve-out of
    IDAU-secure space, so (sau=NSC, idau=Secure) stays NonSecureCallable
    instead of escalating to Secure.
    """
    if sau is SecurityAttr.NONSECURE_CALLABLE and idau is SecurityAttr.SECURE:
        return SecurityAttr.NONSECURE_CALLABLE
    return SecurityAttr(max(sau, idau))


class MemoryMap:
    """Ordered, non-overlapping regions over a zero-initialized byte store.

    Instances are single-owner mutable; freeze (stop adding regions and
    writing) before sharing across threads.
    """

    def __init__(self, regions: tuple[Region, ...] | list[Region] = ()):
        self._regions: list[Region] = []
        self._bases: list[int] = []
        self._store: dict[str, bytearray] = {}
        for region in regions:
            self.add_region(region)

    @property
    def regions(self) -> tuple[Region, ...]:
        return tuple(self._regions)

    def add_region(self, region: Region) -> None:
        """Insert a region; its backing bytes start zeroed."""
        for existing in self._regions:
            if region.base < existing.end and existing.base < region.end:
                raise OverlapError(
                    f"region {region.name!r} overlaps {existing.name!r}"
                )
        if region.name in self._store:
            raise OverlapError(f"duplicate region name {region.name!r}")
        idx = bisect.bisect(self._bases, region.base)
        self._regions.insert(idx, region)
        self._bases.insert(idx, region.base)
        self._store[region.name] = bytearray(region.size)

    def region_at(self, addr: int) -> Region | None:
        idx = bisect.bisect_right(self._bases, addr) - 1
        if idx < 0:
            return None
        region = self._regions[idx]
        return region if region.contains(addr) else None

    def region_named(self, name: str) -> Region:
        for region in self._regions:
            if region.name == name:
                return region
        raise ConfigError(f"no region named {name!r} in the memory map")

    def attribute_lookup(self, addr: int) -> EffectiveAttr:
        """Classify an address; raises an UnmappedError fault outside all regions."""
        region = self.region_at(addr)
        if region is None:
            raise Fault(FaultKind.UNMAPPED_ERROR, at=addr, detail="address is not mapped")
        return EffectiveAttr(world=combine_attrs(region.sau, region.idau), bus=region.ahb)

    def check_access(
        self, requester: SecurityAttr, addr: int, kind: AccessKind
    ) -> Fault | None:
        """Attribution verdict for one byte; ``None`` means the access is allowed.

        Pure: never mutates the map.  Secure requesters bypass attribution
        entirely.  A non-secure requester faults on secure addresses (SAU), on
        data access to callable gateway addresses (SAU), and on bus-protected
        addresses (AHB) even when the world says non-secure.
        """
        attr = self.attribute_lookup(addr)
        if requester is SecurityAttr.SECURE:
            return None
        if attr.world is SecurityAttr.SECURE:
            return Fault(
                FaultKind.SECURE_FAULT,
                at=addr,
                detail=f"non-secure {kind.value} of a secure address",
            )
        if attr.world is SecurityAttr.NONSECURE_CALLABLE:
            if kind is AccessKind.EXECUTE:
                return None
            return Fault(
                FaultKind.SECURE_FAULT,
                at=addr,
                detail=f"non-secure data {kind.value} of a gateway address",
            )
        if attr.bus is BusAttr.SECURE:
            return Fault(
                FaultKind.DATA_BUS_ERROR,
                at=addr,
                detail=f"bus controller refused non-secure {kind.value}",
            )
        return None

    # Raw store access below carries no attribution; it models what secure
    # code and the simulator itself can always do.

    def read(self, addr: int, size: int) -> bytes:
        out = bytearray()
        cursor = addr
        while len(out) < size:
            region = self.region_at(cursor)
            if region is None:
                raise Fault(FaultKind.UNMAPPED_ERROR, at=cursor, detail="read of unmapped byte")
            take = min(size - len(out), region.end - cursor)
            offset = cursor - region.base
            out += self._store[region.name][offset : offset + take]
            cursor += take
        return bytes(out)

    def write(self, addr: int, data: bytes) -> None:
        cursor = addr
        remaining = memoryview(bytes(data))
        while remaining:
            region = self.region_at(cursor)
            if region is None:
                raise Fault(FaultKind.UNMAPPED_ERROR, at=cursor, detail="write of unmapped byte")
            take = min(len(remaining), region.end - cursor)
            offset = cursor - region.base
            self._store[region.name][offset : offset + take] = remaining[:take]
            remaining = remaining[take:]
            cursor += take

    def dump_region(self, name: str) -> bytes:
        self.region_named(name)
        return bytes(self._store[name])

    def clone(self) -> MemoryMap:
        other = MemoryMap()
        other._regions = list(self._regions)
        other._bases = list(self._bases)
        other._store = {name: bytearray(buf) for name, buf in self._store.items()}
        return other

    @classmethod
    def from_text(cls, text: str, source: str = "<memory-map>") -> MemoryMap:
        """Parse the line-oriented map format.

        One region per line: ``name base_hex size_hex sau idau ahb`` with
        sau/idau in {S, NS, NSC} and ahb in {S, NS}.  ``#`` starts a comment.
        Parse errors report the offending line number.
        """
        mem = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ConfigError(
                    f"{source}:{lineno}: expected 'name base size sau idau ahb', "
                    f"got {len(fields)} fields"
                )
            name, base_s, size_s, sau_s, idau_s, ahb_s = fields
            try:
                base = int(base_s, 16)
                size = int(size_s, 16)
            except ValueError:
                raise ConfigError(
                    f"{source}:{lineno}: base and size must be hex integers"
                ) from None
            try:
                sau = _SEC_TOKENS[sau_s]
                idau = _SEC_TOKENS[idau_s]
            except KeyError:
                raise ConfigError(
                    f"{source}:{lineno}: security attribute must be one of S, NS, NSC"
                ) from None
            try:
                ahb = _BUS_TOKENS[ahb_s]
            except KeyError:
                raise ConfigError(
                    f"{source}:{lineno}: bus attribute must be S or NS"
                ) from None
            try:
                mem.add_region(Region(name, base, size, sau, idau, ahb))
            except (OverlapError, BoundsError) as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from exc
        return mem

    @classmethod
    def from_file(cls, path: str | Path) -> MemoryMap:
        path = Path(path)
        return cls.from_text(path.read_text(), source=str(path))


_SEC_TOKENS = {
    "NS": SecurityAttr.NONSECURE,
    "NSC": SecurityAttr.NONSECURE_CALLABLE,
    "S": SecurityAttr.SECURE,
}
_BUS_TOKENS = {"NS": BusAttr.NONSECURE, "S": BusAttr.SECURE}


# Cortex-M33 style default layout.  ns_ram is non-secure to both attribution
# units but sits behind the secure AHB controller, so non-secure data access
# raises a bus error there rather than a secure fault.
DEFAULT_MAP_TEXT = """\
ns_flash   0x00010000 0x00010000 NS  NS  NS
s_flash    0x10000000 0x000FE000 S   S   S
veneer     0x100FE000 0x00002000 NSC S   S
ns_ram     0x20130000 0x00010000 NS  NS  S
s_ram      0x30000000 0x00020000 S   S   S
"""


def default_map() -> MemoryMap:
    return MemoryMap.from_text(DEFAULT_MAP_TEXT, source="<default-map>")
