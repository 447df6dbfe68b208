"""Command-line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness, selftest
from .harness import ConfigError, ExperimentConfig, TableError

EXIT_OK, EXIT_USAGE, EXIT_COMPARE, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="key=value config file")
    p.add_argument("--out", "-o", help="output CSV path (default: stdout)")
    grp = p.add_argument_group("config overrides")
    for f in dataclasses.fields(ExperimentConfig):
        grp.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE")


def _config(args) -> ExperimentConfig:
    over = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return harness.load_config(args.config, over)


def _emit(table: harness.Table, path) -> None:
    text = harness.format_table(table)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gturbo", description="Turbo recovery from quantized partial-DFT measurements.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run Monte-Carlo trials and write per-iteration MSE")
    _add_config_args(p)
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("se", help="run the state-evolution recursion")
    _add_config_args(p)

    p = sub.add_parser("compare", help="compare a simulation table with an SE table")
    p.add_argument("sim")
    p.add_argument("se")
    p.add_argument("--tol-db", type=float, default=0.5)
    p.add_argument("--t-check", type=int, default=10)
    p.add_argument("--out", "-o")

    p = sub.add_parser("selftest", help="check the denoisers and quadratures against oracles")
    p.add_argument("--draws", type=int, default=200)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "simulate":
            cfg = _config(args)
            outcomes = harness.run_simulation(cfg, workers=args.workers)
            table = harness.simulation_table(cfg, outcomes)
            _emit(table, args.out)
            flagged = table.meta["diverged_trials"]
            if flagged != "none":
                print(f"warning: diverged trials: {flagged}", file=sys.stderr)
            return EXIT_OK
        if args.cmd == "se":
            cfg = _config(args)
            table, diverged = harness.se_table(cfg)
            _emit(table, args.out)
            if diverged:
                print("error: state evolution diverged; partial trajectory written", file=sys.stderr)
                return EXIT_DIVERGED
            return EXIT_OK
        if args.cmd == "compare":
            sim, se = harness.read_table(args.sim), harness.read_table(args.se)
            report = harness.compare(sim, se, args.t_check, args.tol_db)
            _emit(report.table(sim.config_hash), args.out)
            print(f"max |gap| over t<={args.t_check}: {report.max_gap_db:.3f} dB "
                  f"(tol {args.tol_db} dB) -> {'PASS' if report.passed else 'FAIL'}", file=sys.stderr)
            return EXIT_OK if report.passed else EXIT_COMPARE
        if args.cmd == "selftest":
            return EXIT_OK if selftest.run(args.draws) else EXIT_COMPARE
    except (ConfigError, TableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
