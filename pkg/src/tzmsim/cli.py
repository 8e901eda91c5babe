"""Command-line front end for running scenarios and campaigns."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .faults import ConfigError
from .harness import (
    Scenario,
    ScenarioId,
    SizeProfile,
    build_sim_state,
    matches_expected,
    parse_apps_file,
    render_json,
    render_text,
    run_campaign,
)
from .mitigation import MitigationConfig


def _parse_scenarios(value: str, parser: argparse.ArgumentParser) -> list[ScenarioId]:
    if value == "all":
        return list(ScenarioId)
    ids = []
    for part in value.split(","):
        try:
            ids.append(ScenarioId(int(part)))
        except ValueError:
            parser.error(f"invalid scenario id {part!r}: expected 0-5 or 'all'")
    return ids


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tzmsim",
        description=(
            "Run memory-isolation attack scenarios against the TrustZone-M "
            "simulator and report outcomes and leaked bytes."
        ),
    )
    parser.add_argument("--map", metavar="PATH", help="memory-map config file (default: built-in map)")
    parser.add_argument("--apps", metavar="PATH", help="app layout file: 'app_id payload_hex' lines")
    parser.add_argument("--scenario", default="all", metavar="ID", help="scenario id 0-5, comma list, or 'all'")
    parser.add_argument("--mitigation", choices=("on", "off"), default="off")
    parser.add_argument("--no-boundary", action="store_true", help="disable the boundary verifier")
    parser.add_argument("--no-verifier", action="store_true", help="disable the response verifier")
    parser.add_argument("--no-collector", action="store_true", help="disable the leak collector")
    parser.add_argument("--report", choices=("text", "json"), default="text")
    parser.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    parser.add_argument("--seed", type=int, default=0, help="seed for deterministic app payloads")
    parser.add_argument("--full-size", action="store_true", help="KiB-scale sizes instead of desk-scale bytes")
    args = parser.parse_args(argv)

    scenario_ids = _parse_scenarios(args.scenario, parser)
    if args.mitigation == "on":
        mitigation = MitigationConfig(
            boundary=not args.no_boundary,
            verifier=not args.no_verifier,
            collector=not args.no_collector,
        )
    else:
        mitigation = MitigationConfig.off()
    profile = SizeProfile.full_size() if args.full_size else SizeProfile.desk()

    try:
        map_text = Path(args.map).read_text() if args.map else None
        apps = (
            parse_apps_file(Path(args.apps).read_text(), source=args.apps)
            if args.apps
            else None
        )

        def factory():
            return build_sim_state(
                map_text=map_text,
                map_source=args.map or "<default-map>",
                apps=apps,
                profile=profile,
                seed=args.seed,
            )

        factory()  # validate the configuration before running anything
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    scenarios = [Scenario(sid) for sid in scenario_ids]
    report = run_campaign(factory, scenarios, mitigation)
    rendered = render_json(report) if args.report == "json" else render_text(report)
    if args.out:
        Path(args.out).write_text(rendered)
    else:
        sys.stdout.write(rendered)

    ok = all(matches_expected(result, mitigation) for result in report.results)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
