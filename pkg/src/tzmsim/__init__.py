"""tzmsim: a desk-scale TrustZone-M memory isolation simulator.

Models SAU/IDAU/bus attribution over a flat 32-bit address space, world
transitions, gateway entries into a shared secure pool, a harness for the six
attack scenarios with per-exchange leak accounting, and a mitigation layer
that forces every exchange to leak zero bytes.
"""

from .faults import (
    AccountingError,
    BoundsError,
    ConfigError,
    DoubleFree,
    Fault,
    FaultKind,
    FaultSource,
    InputDataError,
    MitigationBlocked,
    OverlapError,
    PoolBoundsError,
    PoolExhausted,
    ProtocolMaxExceeded,
    SimError,
    StateError,
    UnknownApp,
)
from .memmap import (
    AccessKind,
    BusAttr,
    DEFAULT_MAP_TEXT,
    EffectiveAttr,
    MemoryMap,
    Region,
    SecurityAttr,
    combine_attrs,
    default_map,
)
from .execution import (
    ExecutionContext,
    Mode,
    bxns_transition,
    gateway_enter,
    read_word,
    secure_return,
    tt_query,
    write_word,
)
from .services import (
    ACHILLES_HEEL_MESSAGE,
    AppRegistry,
    EntryHandler,
    TrustedApp,
    VeneerEntry,
    allocate_app,
    entry_printf,
    get_dram_data,
    heartbeat,
    moflow_overflow,
)
from .mitigation import (
    AllocationLedger,
    AllocEvent,
    BoundaryDecision,
    FreeEvent,
    GuardedServices,
    LeakAlert,
    MitigationConfig,
    WriteEvent,
    boundary_verify,
    leak_collect,
    verifier_check,
)
from .harness import (
    CampaignReport,
    LeakLedger,
    LeakRecord,
    Outcome,
    Scenario,
    ScenarioId,
    ScenarioResult,
    SimState,
    SizeProfile,
    build_sim_state,
    expected_outcome,
    record_leak,
    render_json,
    render_text,
    run_campaign,
    run_scenario,
)

__version__ = "0.1.0"
