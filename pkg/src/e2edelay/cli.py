"""Command-line entry point.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 unstable network.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .dessim import Mode
from .experiments import cmd_approx, cmd_compare, cmd_simulate, rho_sweep
from .netmodel import NetworkError, UnstableNetworkError
from .scenario import ScenarioError, load_scenario
from .topogen import TopologyGenError, parse_tiers, scenario_document

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNSTABLE = 3


def _loads(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad load list: {text}") from exc
    if not vals or any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError("loads must lie strictly between 0 and 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="e2edelay", description="End-to-end delay approximation and simulation."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("approx", "per-flow AKIA/KIA approximations"),
        ("simulate", "packet-level simulation, writes delay samples"),
        ("compare", "simulate and compare against both approximations"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--rho-sweep", type=_loads, metavar="L1,L2,...",
                       help="rescale flow rates so the busiest link runs at each load")
        if name != "approx":
            p.add_argument("--seed", type=int)
            p.add_argument("--reps", type=int, default=1)
            p.add_argument("--mode", choices=[m.value for m in Mode])
        if name == "simulate":
            p.add_argument("--format", choices=["tsv", "npz"], default="tsv")

    g = sub.add_parser("gen-topology", help="generate a tiered topology scenario file")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tiers", default="10e9:0.1,1e9:0.3,100e6:0.6",
                   help="capacity_bps:share list, fastest tier first")
    g.add_argument("--flows", type=int, default=100)
    g.add_argument("--flow-rate-bps", type=float, default=2e6)
    g.add_argument("--mean-packet-bytes", type=float, default=186.0)
    g.add_argument("--sim-seconds", type=float, default=20.0)
    g.add_argument("--out", type=Path, required=True, help="scenario file to write")
    return parser


def _run(args) -> int:
    if args.command == "gen-topology":
        doc = scenario_document(
            args.nodes, args.seed, parse_tiers(args.tiers), args.flows,
            args.flow_rate_bps, args.mean_packet_bytes, args.sim_seconds,
        )
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK

    scenario = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        scenario = replace(scenario, sim=replace(scenario.sim, seed=args.seed))
    reps = getattr(args, "reps", 1)
    if reps < 1:
        raise ScenarioError("--reps must be >= 1")
    mode = getattr(args, "mode", None)

    if args.rho_sweep:
        rho_sweep(scenario, args.rho_sweep, args.out, args.command, reps, mode,
                  getattr(args, "format", "tsv"))
    elif args.command == "approx":
        cmd_approx(scenario, args.out)
    elif args.command == "simulate":
        cmd_simulate(scenario, args.out, reps, mode, args.format)
    else:
        cmd_compare(scenario, args.out, reps, mode)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except UnstableNetworkError as exc:
        print(f"error: unstable network: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (ScenarioError, NetworkError, TopologyGenError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
