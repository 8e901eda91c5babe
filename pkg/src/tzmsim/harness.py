"""Scenario scripts, leakage accounting and campaign reports.

Six numbered scenarios reproduce the attack catalogue over a fresh simulator
state each.  Every exchange that produces a response is entered into a leak
ledger as response-length R against expected-length O; the per-exchange leak
is delta_m = R - O and a campaign is robust exactly when the deltas sum to
zero.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .execution import ExecutionContext, bxns_transition, gateway_enter, read_word, secure_return
from .faults import AccountingError, ConfigError, Fault, FaultKind, MitigationBlocked, SimError
from .memmap import MemoryMap, SecurityAttr, combine_attrs, default_map
from .mitigation import AllocationLedger, AllocEvent, GuardedServices, MitigationConfig, leak_collect
from .services import AppRegistry, EntryHandler, VeneerEntry

# Default-map probe addresses used by the scripted scenarios.
SECURE_PROBE_ADDR = 0x1000_0000     # secure flash base; holds the seeded secret
BUS_PROTECTED_ADDR = 0x2013_0000    # non-secure world, secure bus attribute
NS_CODE_BASE = 0x0001_0000          # non-secure program flash base

SECRET_BYTES = b"device-master-key-0123456789abcdef"

DEFAULT_APP_IDS = ("A1", "A2", "A3", "A5")

_VENEER_LAYOUT = (
    (EntryHandler.PRINTF, 0x00),
    (EntryHandler.HEARTBEAT, 0x40),
    (EntryHandler.GET_DRAM_DATA, 0x80),
)


class ScenarioId(enum.IntEnum):
    """Numbering is frozen to the firmware test-case constants."""

    HEART_BLEED = 0
    INV_S_TO_NS_TRANS = 1
    INV_S_ENTRY = 2
    INV_NS_DATA_ACCESS = 3
    INV_INPUT_PARAMS = 4
    INV_NS_DATA2_ACCESS = 5


@dataclass(frozen=True)
class Scenario:
    id: ScenarioId
    params: Mapping[str, Any] = field(default_factory=dict)


class Outcome(enum.Enum):
    FAULTED = "faulted"
    LEAKED = "leaked"
    BLOCKED = "blocked"
    CLEAN = "clean"


@dataclass(frozen=True)
class LeakRecord:
    instruction: str
    response_len: int
    expected_len: int
    delta_m: int


class LeakLedger:
    """Per-exchange accounting of response length against expected length."""

    def __init__(self):
        self.records: list[LeakRecord] = []

    def record(self, instruction: str, response_len: int, expected_len: int) -> LeakRecord:
        if response_len < expected_len:
            raise AccountingError(
                f"response shorter than expected ({response_len} < {expected_len})"
            )
        rec = LeakRecord(instruction, response_len, expected_len, response_len - expected_len)
        self.records.append(rec)
        return rec

    @property
    def total_delta(self) -> int:
        return sum(rec.delta_m for rec in self.records)


def record_leak(
    ledger: LeakLedger, instruction: str, response_len: int, expected_len: int
) -> LeakRecord:
    return ledger.record(instruction, response_len, expected_len)


@dataclass
class ScenarioResult:
    scenario: Scenario
    outcome: Outcome
    fault: Fault | None = None
    leak: LeakRecord | None = None
    blocked_reason: str | None = None
    data: bytes | None = None  # response/echo payload, for oracle comparisons

    @property
    def leaked_bytes(self) -> int:
        if self.outcome is Outcome.LEAKED and self.leak is not None:
            return self.leak.delta_m
        return 0


@dataclass
class CampaignReport:
    results: list[ScenarioResult]
    successful_attacks: int     # S_N
    max_leak: int               # F_m
    total_delta: int
    robust: bool


@dataclass(frozen=True)
class SizeProfile:
    """Byte scaling for scenario sizes: desk scale is 1-byte units, full size 1 KiB.

    All ratios are preserved, so a 16-unit payload against a 128-unit claim
    leaks 112 units at either scale.
    """

    unit: int = 1

    @classmethod
    def desk(cls) -> SizeProfile:
        return cls(unit=1)

    @classmethod
    def full_size(cls) -> SizeProfile:
        return cls(unit=1024)

    @property
    def app_size(self) -> int:
        return 16 * self.unit

    @property
    def heartbeat_payload(self) -> int:
        return 16 * self.unit

    @property
    def heartbeat_claimed(self) -> int:
        return 128 * self.unit

    @property
    def protocol_max(self) -> int:
        return 128 * self.unit


@dataclass
class SimState:
    mem: MemoryMap
    registry: AppRegistry
    veneer: dict[EntryHandler, VeneerEntry]
    ledger: AllocationLedger
    profile: SizeProfile


def parse_apps_file(text: str, source: str = "<apps>") -> list[tuple[str, bytes]]:
    """Parse ``app_id payload_hex`` lines; ``#`` starts a comment."""
    apps: list[tuple[str, bytes]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ConfigError(f"{source}:{lineno}: expected 'app_id payload_hex'")
        app_id, payload_hex = fields
        try:
            payload = bytes.fromhex(payload_hex)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: payload is not valid hex") from None
        apps.append((app_id, payload))
    return apps


def build_sim_state(
    map_text: str | None = None,
    map_source: str = "<memory-map>",
    apps: Iterable[tuple[str, bytes]] | None = None,
    profile: SizeProfile | None = None,
    seed: int = 0,
    pool_region: str = "s_ram",
) -> SimState:
    """Build a fresh simulator state: map, seeded secret, pool apps, veneer table.

    Default apps are four pool neighbours with pseudo-random payloads drawn
    from ``seed``, so identical seeds rebuild identical pools.
    """
    profile = profile or SizeProfile.desk()
    mem = (
        MemoryMap.from_text(map_text, source=map_source)
        if map_text is not None
        else default_map()
    )
    if mem.region_at(SECURE_PROBE_ADDR) is not None:
        mem.write(SECURE_PROBE_ADDR, SECRET_BYTES + b"\x00")
    registry = AppRegistry(mem, pool_region=pool_region)
    ledger = AllocationLedger()
    if apps is None:
        rng = random.Random(seed)
        apps = [(app_id, rng.randbytes(profile.app_size)) for app_id in DEFAULT_APP_IDS]
    for app_id, payload in apps:
        app = registry.allocate(app_id, payload)
        leak_collect(ledger, AllocEvent(app.app_id, app.base, app.size))
    veneer_region = next(
        (r for r in mem.regions if combine_attrs(r.sau, r.idau) is SecurityAttr.NONSECURE_CALLABLE),
        None,
    )
    if veneer_region is None:
        raise ConfigError("memory map has no non-secure-callable region for the veneer table")
    veneer: dict[EntryHandler, VeneerEntry] = {}
    for handler, offset in _VENEER_LAYOUT:
        address = veneer_region.base + offset
        if address >= veneer_region.end:
            raise ConfigError(
                f"callable region {veneer_region.name!r} too small for the veneer table"
            )
        veneer[handler] = VeneerEntry(name=handler.value, address=address, handler=handler)
    return SimState(mem=mem, registry=registry, veneer=veneer, ledger=ledger, profile=profile)


def _default_params(sid: ScenarioId, profile: SizeProfile) -> dict[str, Any]:
    if sid is ScenarioId.HEART_BLEED:
        return {"victim": None, "payload": None, "claimed": profile.heartbeat_claimed}
    if sid is ScenarioId.INV_S_TO_NS_TRANS:
        # Both listed violations at once: residue in r0 and the LSB set.
        return {"register_residue": 0xDEADBEEF, "target": NS_CODE_BASE | 1}
    if sid is ScenarioId.INV_S_ENTRY:
        return {"offset": 4}
    if sid is ScenarioId.INV_NS_DATA_ACCESS:
        return {"addr": SECURE_PROBE_ADDR}
    if sid is ScenarioId.INV_INPUT_PARAMS:
        return {"str_addr": SECURE_PROBE_ADDR, "max_len": 128, "validate": False}
    if sid is ScenarioId.INV_NS_DATA2_ACCESS:
        return {"addr": BUS_PROTECTED_ADDR}
    raise ConfigError(f"unknown scenario id {sid!r}")


def run_scenario(
    state: SimState,
    scenario: Scenario,
    mitigation: MitigationConfig = MitigationConfig.off(),
    leaks: LeakLedger | None = None,
) -> ScenarioResult:
    """Execute one scripted scenario against a fresh state.

    Deterministic: identical state inputs, parameters and mitigation flags
    produce an identical result.  Architectural faults and mitigation refusals
    become the Faulted/Blocked outcomes; leak-producing exchanges become
    Leaked (delta_m > 0) or Clean (delta_m = 0).
    """
    leaks = leaks if leaks is not None else LeakLedger()
    params = {**_default_params(scenario.id, state.profile), **dict(scenario.params)}
    guard = GuardedServices(
        state.mem,
        state.registry,
        state.veneer,
        state.ledger,
        mitigation,
        protocol_max=state.profile.protocol_max,
    )
    label = scenario.id.name.lower()
    try:
        if scenario.id is ScenarioId.HEART_BLEED:
            victim = params["victim"] or state.registry.apps[0].app_id
            payload = params["payload"]
            if payload is None:
                payload = b"\xa5" * state.profile.heartbeat_payload
            ctx = ExecutionContext(world=SecurityAttr.NONSECURE)
            response = guard.heartbeat(ctx, victim, payload, params["claimed"])
            rec = leaks.record(label, len(response), len(payload))
            outcome = Outcome.LEAKED if rec.delta_m > 0 else Outcome.CLEAN
            return ScenarioResult(scenario, outcome, leak=rec, data=response)

        if scenario.id is ScenarioId.INV_S_TO_NS_TRANS:
            ctx = ExecutionContext(world=SecurityAttr.SECURE)
            ctx.regs[0] = params["register_residue"]
            bxns_transition(ctx, state.mem, params["target"])
            return ScenarioResult(scenario, Outcome.CLEAN)

        if scenario.id is ScenarioId.INV_S_ENTRY:
            ctx = ExecutionContext(world=SecurityAttr.NONSECURE)
            gateway_enter(ctx, state.mem, state.veneer[EntryHandler.PRINTF], params["offset"])
            secure_return(ctx, 0)
            return ScenarioResult(scenario, Outcome.CLEAN)

        if scenario.id in (ScenarioId.INV_NS_DATA_ACCESS, ScenarioId.INV_NS_DATA2_ACCESS):
            ctx = ExecutionContext(world=SecurityAttr.NONSECURE)
            read_word(ctx, state.mem, params["addr"])
            return ScenarioResult(scenario, Outcome.CLEAN)

        if scenario.id is ScenarioId.INV_INPUT_PARAMS:
            entry = state.veneer[EntryHandler.PRINTF]
            if params["validate"]:
                entry = dataclasses.replace(entry, validates_inputs=True)
            ctx = ExecutionContext(world=SecurityAttr.NONSECURE)
            echoed = guard.entry_printf(
                ctx, params["str_addr"], params["max_len"], entry=entry
            )
            # Nothing of this exchange is a legitimate response, so the
            # expected length is zero and every echoed byte counts as leaked.
            rec = leaks.record(label, len(echoed), 0)
            outcome = Outcome.LEAKED if rec.delta_m > 0 else Outcome.CLEAN
            return ScenarioResult(scenario, outcome, leak=rec, data=echoed)

        raise ConfigError(f"unknown scenario id {scenario.id!r}")
    except Fault as fault:
        return ScenarioResult(scenario, Outcome.FAULTED, fault=fault)
    except MitigationBlocked as blocked:
        rec = leaks.record(label, 0, 0)
        return ScenarioResult(
            scenario, Outcome.BLOCKED, leak=rec, blocked_reason=blocked.reason
        )


def run_campaign(
    state_factory: Callable[[], SimState],
    scenarios: Iterable[Scenario],
    mitigation: MitigationConfig = MitigationConfig.off(),
) -> CampaignReport:
    """Run scenarios over fresh states and aggregate the leak accounting.

    Per-scenario simulator errors are recorded on the result (as a blocked
    exchange carrying the error text), never propagated.
    """
    leaks = LeakLedger()
    results: list[ScenarioResult] = []
    for scenario in sorted(scenarios, key=lambda s: int(s.id)):
        state = state_factory()
        try:
            results.append(run_scenario(state, scenario, mitigation, leaks))
        except SimError as exc:
            results.append(
                ScenarioResult(scenario, Outcome.BLOCKED, blocked_reason=f"scenario error: {exc}")
            )
    leaked = [r for r in results if r.outcome is Outcome.LEAKED]
    return CampaignReport(
        results=results,
        successful_attacks=len(leaked),
        max_leak=max((r.leak.delta_m for r in leaked if r.leak), default=0),
        total_delta=leaks.total_delta,
        robust=leaks.total_delta == 0,
    )


def expected_outcome(
    sid: ScenarioId, mitigation: MitigationConfig
) -> tuple[Outcome, FaultKind | None]:
    """The reference outcome table for one scenario under given flags."""
    if sid in (
        ScenarioId.INV_S_TO_NS_TRANS,
        ScenarioId.INV_S_ENTRY,
        ScenarioId.INV_NS_DATA_ACCESS,
    ):
        return (Outcome.FAULTED, FaultKind.SECURE_FAULT)
    if sid is ScenarioId.INV_NS_DATA2_ACCESS:
        return (Outcome.FAULTED, FaultKind.DATA_BUS_ERROR)
    if sid is ScenarioId.INV_INPUT_PARAMS:
        return (Outcome.BLOCKED, None) if mitigation.boundary else (Outcome.LEAKED, None)
    return (Outcome.BLOCKED, None) if mitigation.verifier else (Outcome.LEAKED, None)


def matches_expected(result: ScenarioResult, mitigation: MitigationConfig) -> bool:
    want_outcome, want_kind = expected_outcome(result.scenario.id, mitigation)
    if result.outcome is not want_outcome:
        return False
    if want_kind is not None:
        return result.fault is not None and result.fault.kind is want_kind
    return True


def report_to_doc(report: CampaignReport) -> dict[str, Any]:
    """Report as plain data with the fixed field names of the wire format."""
    results = []
    for r in report.results:
        results.append(
            {
                "scenario_id": int(r.scenario.id),
                "outcome": r.outcome.value,
                "fault_kind": r.fault.kind.value if r.fault else None,
                "fault_source": r.fault.source.value if r.fault else None,
                "leaked_bytes": r.leaked_bytes,
                "delta_m": r.leak.delta_m if r.leak else None,
            }
        )
    return {
        "results": results,
        "S_N": report.successful_attacks,
        "F_m": report.max_leak,
        "total_delta": report.total_delta,
        "robust": report.robust,
    }


def render_json(report: CampaignReport) -> str:
    return json.dumps(report_to_doc(report), indent=2, sort_keys=True) + "\n"


def render_text(report: CampaignReport) -> str:
    lines = ["scenario results:"]
    for r in report.results:
        fault = f"{r.fault.kind.value}/{r.fault.source.value}" if r.fault else "-"
        delta = str(r.leak.delta_m) if r.leak else "-"
        line = (
            f"  scenario {int(r.scenario.id)} {r.scenario.id.name.lower():<20}"
            f" outcome={r.outcome.value:<7}"
            f" fault={fault:<20}"
            f" leaked_bytes={r.leaked_bytes:<8}"
            f" delta_m={delta}"
        )
        if r.blocked_reason:
            line += f"  [{r.blocked_reason}]"
        lines.append(line)
    robust = "true" if report.robust else "false"
    lines.append(
        f"totals: S_N={report.successful_attacks} F_m={report.max_leak} "
        f"total_delta={report.total_delta} robust={robust}"
    )
    return "\n".join(lines) + "\n"
