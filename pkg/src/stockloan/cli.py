"""Command-line front end.

Every failure prints one line ``error: <Kind>: <message>`` to stderr.
Exit codes: 0 success, 1 I/O failure, 2 invalid input or parameters,
3 a verification gate failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import closedform, crosscheck, fairterms, lcp
from .exceptions import StockLoanError
from .params import LoanTerms, load_config, validate

EXIT_IO = 1
EXIT_INPUT = 2
EXIT_GATE = 3


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _fail(kind: str, message: str, code: int) -> int:
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def cmd_price(args: argparse.Namespace) -> int:
    market, terms = load_config(args.config)
    regime = validate(market, terms)
    vf = closedform.build(market, terms)
    x = terms.s0 if args.x is None else args.x
    rows = [
        ("f(x)", _fmt(closedform.value(vf, x))),
        ("x", _fmt(x)),
        ("b", _fmt(vf.b)),
        ("lambda1", _fmt(vf.exponents.lambda1)),
        ("lambda2", _fmt(vf.exponents.lambda2)),
        ("regime", regime.tag.value),
        ("shape", vf.shape.value),
    ]
    for key, val in rows:
        print(f"{key} = {val}")
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    if not args.x_max > 0:
        raise argparse.ArgumentTypeError("--x-max must be > 0")
    if args.points < 2:
        raise argparse.ArgumentTypeError("--points must be >= 2")
    market, terms = load_config(args.config)
    validate(market, terms)
    vf = closedform.build(market, terms)
    uncapped = closedform.build(market, LoanTerms(q=terms.q, gamma=terms.gamma, c=terms.c, s0=terms.s0))
    xs = np.linspace(0.0, args.x_max, args.points)
    columns = (
        xs,
        closedform.value(vf, xs),
        closedform.payoff(xs, terms.q, terms.cap),
        closedform.value(uncapped, xs),
    )
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "value", "payoff", "uncapped_value"])
            for row in zip(*columns):
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        return _fail("IOError", f"{args.out}: {exc.strerror or exc}", EXIT_IO)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    market, terms = load_config(args.config)
    validate(market, terms)
    check = crosscheck.cross_check(
        market,
        terms,
        args.x,
        mc_paths=args.mc_paths,
        seed=args.seed,
        lattice_steps=args.lattice_steps,
        lattice_horizon=args.lattice_horizon,
        lcp_nodes=args.lcp_nodes,
    )
    print(json.dumps(check.to_dict(), indent=2))
    if args.lcp_dump:
        vf = closedform.build(market, terms)
        sol = lcp.solve(market, terms, n=args.lcp_nodes)
        try:
            lcp.write_csv(sol, vf, args.lcp_dump)
        except OSError as exc:
            return _fail("IOError", f"{args.lcp_dump}: {exc.strerror or exc}", EXIT_IO)
    if not check.passed:
        return _fail("GateFailure", "oracle disagreement: " + ", ".join(check.failing), EXIT_GATE)
    return 0


def cmd_fair(args: argparse.Namespace) -> int:
    market, terms = load_config(args.config)
    report = fairterms.fair_fee(market, terms.q, terms.gamma, terms.cap, terms.s0)
    if args.format in ("table", "both"):
        print(report.table())
    if args.format == "both":
        print()
    if args.format in ("json", "both"):
        print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_regime_check(args: argparse.Namespace) -> int:
    market, terms = load_config(args.config)
    regime = validate(market, terms)
    print(f"regime = {regime.tag.value}")
    print(f"r_tilde = {_fmt(regime.r_tilde)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stockloan", description="Valuation and verification of (capped) stock loans."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="key=value parameter file")
        return p

    p = with_config("price", "value the loan at one price")
    p.add_argument("--x", type=float, default=None, help="discounted stock price (default: s0)")
    p.set_defaults(func=cmd_price)

    p = with_config("curve", "write the value curve as CSV")
    p.add_argument("--x-max", type=float, required=True)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = with_config("verify", "cross-check the closed form against LCP, MC and lattice")
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--mc-paths", type=int, default=100_000)
    p.add_argument("--lattice-steps", type=int, default=20_000)
    p.add_argument("--lattice-horizon", type=float, default=400.0)
    p.add_argument("--lcp-nodes", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lcp-dump", default=None, help="write x,h_lcp,h_closed,payoff CSV here")
    p.set_defaults(func=cmd_verify)

    p = with_config("fair", "fair service fee for the configured loan")
    p.add_argument("--format", choices=("table", "json", "both"), default="both")
    p.set_defaults(func=cmd_fair)

    p = with_config("regime-check", "report the parameter regime")
    p.set_defaults(func=cmd_regime_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StockLoanError as exc:
        return _fail(exc.kind, str(exc), EXIT_INPUT)
    except argparse.ArgumentTypeError as exc:
        return _fail("UsageError", str(exc), EXIT_INPUT)
    except OSError as exc:
        return _fail("IOError", f"{exc.filename}: {exc.strerror or exc}", EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
