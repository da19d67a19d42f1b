"""Command-line entry points for world generation, drives, and campaigns."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import campaign as campaign_mod
from . import mapio, render
from .config import ScenarioConfig, load_scenario, save_scenario
from .simulator import generate_world, simulate_drive


def _scenario(args) -> ScenarioConfig:
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        scenario = ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    if getattr(args, "weeks", None) is not None:
        scenario.weeks = args.weeks
    if getattr(args, "cadence", None) is not None:
        scenario.cadence = args.cadence
    return scenario


def _cmd_world(args) -> int:
    scenario = _scenario(args)
    world = generate_world(scenario.world, scenario.seed)
    mapio.save_world(world, args.out)
    print(f"wrote {args.out}: {len(world.features)} features, "
          f"{len(world.occluders)} occluders")
    return 0


def _cmd_drive(args) -> int:
    scenario = _scenario(args)
    world = mapio.load_world(args.world)
    detector = scenario.detector_for_week(args.week)
    log = simulate_drive(world, args.week, detector, scenario.drive, scenario.seed)
    mapio.save_drive_log(log, args.out)
    n_obs = sum(len(s.observations) for s in log.steps)
    print(f"wrote {args.out}: {len(log.steps)} steps, {n_obs} observations")
    return 0


def _cmd_campaign(args) -> int:
    scenario = _scenario(args)
    out = Path(args.out)
    result = campaign_mod.run_campaign(scenario, out_dir=out)
    save_scenario(scenario, out / "scenario.json")
    mapio.save_world(result.world, out / "world.json")
    if args.render:
        render.render_map(
            result.prior, out / "map.svg", world=result.world, new_map=result.new_map
        )
    last = result.report[-1] if result.report else {}
    print(f"wrote {out}: {scenario.weeks} weeks, "
          f"{last.get('total_features', 0)} features in final map")
    return 0


def _cmd_maintain(args) -> int:
    scenario = _scenario(args)
    prior = mapio.load_map(args.map)
    new_map = mapio.load_new_features(args.layer)
    added, removed = campaign_mod.maintain(prior, new_map, scenario)
    mapio.save_map(prior, args.out_map)
    mapio.save_new_features(new_map, args.out_layer)
    print(f"added {len(added)}, removed {len(removed)}, "
          f"total {len(prior.features)}")
    return 0


def _cmd_report(args) -> int:
    rows = mapio.load_report(args.report)
    header = " ".join(f"{c:>18}" for c in mapio.REPORT_COLUMNS)
    print(header)
    for row in rows:
        print(" ".join(f"{row[c]:>18}" for c in mapio.REPORT_COLUMNS))
    return 0


def _cmd_render(args) -> int:
    prior = mapio.load_map(args.map)
    world = mapio.load_world(args.world) if args.world else None
    new_map = mapio.load_new_features(args.layer) if args.layer else None
    render.render_map(prior, args.out, world=world, new_map=new_map)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapkeeper",
        description="Long-term feature-map maintenance on synthetic drives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_opts(p, seedable=True):
        p.add_argument("--scenario", help="scenario JSON; defaults apply if omitted")
        if seedable:
            p.add_argument("--seed", type=int, help="override the scenario seed")

    p = sub.add_parser("world", help="world file tools")
    wsub = p.add_subparsers(dest="world_command", required=True)
    p = wsub.add_parser("gen", help="generate a world file")
    scenario_opts(p)
    p.add_argument("--out", required=True, help="output world JSON")
    p.set_defaults(func=_cmd_world)

    p = sub.add_parser("drive", help="simulate one weekly drive")
    scenario_opts(p)
    p.add_argument("--world", required=True, help="world JSON")
    p.add_argument("--week", type=int, required=True)
    p.add_argument("--out", required=True, help="output drive log JSONL")
    p.set_defaults(func=_cmd_drive)

    p = sub.add_parser("campaign", help="run the full multi-week loop")
    scenario_opts(p)
    p.add_argument("--weeks", type=int, help="override the scenario week count")
    p.add_argument("--cadence", type=int, help="override the maintenance cadence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--render", action="store_true", help="also write map.svg")
    p.set_defaults(func=_cmd_campaign)

    p = sub.add_parser("maintain", help="run one maintenance cycle on saved layers")
    scenario_opts(p, seedable=False)
    p.add_argument("--map", required=True, help="prior map JSON")
    p.add_argument("--layer", required=True, help="new-feature layer JSON")
    p.add_argument("--out-map", required=True)
    p.add_argument("--out-layer", required=True)
    p.set_defaults(func=_cmd_maintain)

    p = sub.add_parser("report", help="print a campaign report")
    p.add_argument("report", help="report CSV path")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("render", help="render a map to SVG")
    p.add_argument("--map", required=True, help="prior map JSON")
    p.add_argument("--world", help="world JSON for route and occluders")
    p.add_argument("--layer", help="new-feature layer JSON")
    p.add_argument("--out", required=True, help="output SVG path")
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (mapio.MapFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
