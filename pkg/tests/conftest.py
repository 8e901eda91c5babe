import pytest

from tzmsim import (
    AppRegistry,
    BusAttr,
    MemoryMap,
    Region,
    SecurityAttr,
    build_sim_state,
    default_map,
)

NS = SecurityAttr.NONSECURE
NSC = SecurityAttr.NONSECURE_CALLABLE
S = SecurityAttr.SECURE


@pytest.fixture
def mem():
    return default_map()


@pytest.fixture
def state():
    return build_sim_state()


def make_region(name, base, size, sau, idau, ahb=BusAttr.SECURE):
    return Region(name, base, size, sau, idau, ahb)


def tiny_pool_map(pool_size=0x100):
    """Small map with an adjacent NS/S pair and a compact secure pool."""
    mem = MemoryMap(
        [
            Region("ns_code", 0x1000, 0x1000, NS, NS, BusAttr.NONSECURE),
            Region("s_code", 0x2000, 0x1000, S, S, BusAttr.SECURE),
            Region("gate", 0x4000, 0x1000, NSC, S, BusAttr.SECURE),
            Region("s_ram", 0x8000, pool_size, S, S, BusAttr.SECURE),
        ]
    )
    return mem


def tiny_registry(pool_size=0x100):
    return AppRegistry(tiny_pool_map(pool_size), pool_region="s_ram")
