"""Command-line front end.

    prpr <run|stability|phase-diagram|certify|bounds|concentration>
         [--preset NAME] [--config FILE] [--set key=value]... [--seed N] [--out DIR]

Exit codes: 0 all computations completed and every gate passed; 2 config
error; 3 one or more gates failed. Gate outcomes are printed one per line as
`GATE <name> value=<v> require=<r> PASS|FAIL`.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prpr",
        description="Regularized phase retrieval: solvers, experiments, and "
                    "recovery-condition checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "solve seeded instances and write traces plus a summary"),
        ("stability", "noise sweep with lam = 3*sigma; reports the log-log slope"),
        ("phase-diagram", "success probability over an (m, s) grid"),
        ("certify", "minimal-norm dual certificates and injectivity per trial"),
        ("bounds", "closed-form width bounds, sample counts, MC width estimates"),
        ("concentration", "empirical pass fractions of the measurement concentration inequalities"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--preset", choices=sorted(harness.PRESETS), default=None,
                       help="named parameter set for one of the bundled experiments")
        p.add_argument("--config", default=None, metavar="FILE",
                       help="JSON file with config fields")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="sets", help="override one config field (JSON value)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, metavar="DIR")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.resolve_config(args.command, preset=args.preset,
                                     config_path=args.config, sets=args.sets,
                                     seed=args.seed, out=args.out)
        gates = harness.COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    for gate in gates:
        print(gate.line())
    return 3 if any(not g.passed for g in gates) else 0


if __name__ == "__main__":
    sys.exit(main())
