"""Command-line entry point: ``cartocloud {scenario-gen,run,sweep,coverage}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .channel import Interface
from .engine import InterfaceMode, SimConfig, run
from .mobility import PredictorKind
from .output import write_coverage, write_run
from .scenario import Scenario, default_scenario
from .scheme import SchemeKind, SchemeParams
from .sweep import load_spec, run_sweep
from .topology import ConfigurationError

log = logging.getLogger("cartocloud")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cartocloud", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("scenario-gen", help="write the default Manhattan-grid scenario")
    g.add_argument("--out", required=True)
    g.add_argument("--blocks", type=int, default=4)
    g.add_argument("--block-size", type=float, default=250.0)
    g.add_argument("--margin", type=float, default=15.0)
    g.add_argument("--enodebs", type=int, default=3)
    g.add_argument("--rsus", type=int, default=8)

    r = sub.add_parser("run", help="run one simulation (unset flags take the scenario's defaults)")
    r.add_argument("--scenario", required=True)
    r.add_argument("--scheme", choices=[s.value for s in SchemeKind], default="pcat")
    r.add_argument("--mode", choices=[m.value for m in InterfaceMode], default="multi")
    r.add_argument("--predictor", choices=[k.value for k in PredictorKind], default="trajectory_acc")
    for name in ("tau", "alpha", "gamma1", "gamma2", "t-min", "t-max", "delta-t", "duration", "penetration"):
        r.add_argument(f"--{name}", type=float)
    r.add_argument("--vehicles", type=int)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--mobility-tick", type=float, default=0.1)
    r.add_argument("--events", action="store_true", help="log every decision")
    r.add_argument("--trajectories", action="store_true", help="log positions once per decision tick")
    r.add_argument("--predictions", action="store_true", help="score the three predictors at 10/30/60 s")
    r.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="run a sweep spec (JSON) and write combined.csv")
    s.add_argument("spec")
    s.add_argument("--scenario")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)

    c = sub.add_parser("coverage", help="metric raster of a scenario as CSV")
    c.add_argument("--scenario", required=True)
    c.add_argument("--interface", choices=[i.value for i in Interface], default="LTE")
    c.add_argument("--resolution", type=float, default=10.0)
    c.add_argument("--out", required=True)
    return p


def _load_scenario(path) -> Scenario:
    try:
        return Scenario.load(path)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc


def cmd_scenario_gen(args) -> int:
    sc = default_scenario(args.blocks, args.block_size, args.margin, args.enodebs, args.rsus)
    sc.save(args.out)
    log.info("wrote %s (%d buildings, %d sites)", args.out, len(sc.buildings), len(sc.sites))
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)

    def pick(name):
        value = getattr(args, name)
        return scenario.defaults[name] if value is None else value

    params = SchemeParams(**{f.name: float(pick(f.name)) for f in fields(SchemeParams)})
    config = SimConfig(
        scenario,
        vehicles=int(pick("vehicles")),
        penetration=float(pick("penetration")),
        duration=float(pick("duration")),
        packet_size=int(scenario.defaults["packet_size"]),
        mobility_tick=args.mobility_tick,
        scheme=SchemeKind(args.scheme),
        mode=InterfaceMode(args.mode),
        predictor=PredictorKind(args.predictor),
        params=params,
        seed=args.seed,
        prediction_stats=args.predictions,
        record_events=args.events,
        record_trajectories=args.trajectories,
    )
    result = run(config)
    paths = write_run(result, args.out)
    st = result.stats
    log.info("goodput %.1f bit/s, data rate %.3g bit/s, PDR %.4f -> %s", st.goodput, st.data_rate, st.pdr,
             paths["summary"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    scenario = _load_scenario(args.scenario) if args.scenario else default_scenario()
    rows = run_sweep(spec, scenario, args.out, workers=args.workers)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        log.error("run %s/%s/%s/tau=%s/seed=%s failed: %s", r["scheme"], r["mode"], r["predictor"], r["tau"],
                  r["seed"], r["status"])
    log.info("%d runs, %d failed -> %s", len(rows), len(failed), Path(args.out) / "combined.csv")
    return EXIT_CONFIG if failed else EXIT_OK


def cmd_coverage(args) -> int:
    scenario = _load_scenario(args.scenario)
    extent = float(scenario.grid.get("extent") or max(max(n.x, n.y) for n in scenario.network.nodes))
    write_coverage(scenario.environment(), Interface(args.interface), extent, args.resolution, args.out)
    return EXIT_OK


COMMANDS = {"scenario-gen": cmd_scenario_gen, "run": cmd_run, "sweep": cmd_sweep, "coverage": cmd_coverage}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
