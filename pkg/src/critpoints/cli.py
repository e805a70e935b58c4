"""Command line front end.

    critpoints run SCENARIO [--out DIR]
    critpoints sweep --gammas 0.5 1/3 0.25 --d 12 --seeds 0 1 2 [--out DIR]
    critpoints dim SYSTEM [--slack L]
    critpoints construct third --n 5 [--out DIR]
    critpoints construct small --gamma 0.2 --d 300 --k 20 --seed 0 [--out DIR]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dimension import read_set_system, robust_loo_dimension
from .geometry import ConstructionFailed, DomainError, VectorFamily, format_family
from .scenario import (
    family_from_construction,
    parse_number,
    read_scenario,
    run_scenario,
    sweep_csv,
    sweep_trichotomy,
)


def _write_or_print(text: str, out: str | None, filename: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    target = Path(out)
    target.mkdir(parents=True, exist_ok=True)
    (target / filename).write_text(text)
    print(f"wrote {target / filename}")


def cmd_run(args) -> int:
    try:
        scenario = read_scenario(args.scenario)
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status, report, message = run_scenario(scenario, args.out)
    if report is not None:
        sys.stdout.write(report.summary_csv())
    print(message, file=sys.stderr if status else sys.stdout)
    return status


def cmd_sweep(args) -> int:
    try:
        gammas = [parse_number(g) for g in args.gammas]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = sweep_trichotomy(gammas, args.d, args.seeds, n=args.n, target_k=args.k)
    _write_or_print(sweep_csv(rows), args.out, f"trichotomy_d{args.d}.csv")
    bad = [r for r in rows if r["status"] != "ok"]
    return 1 if any(r["status"] == "violation" for r in bad) else 0


def cmd_dim(args) -> int:
    try:
        system = read_set_system(args.system)
        k, witness = robust_loo_dimension(system, args.slack)
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = f"k {k}\nwitness {' '.join(str(c) for c in witness)}\n"
    _write_or_print(text, args.out, f"{Path(args.system).stem}.dim.txt")
    return 0


def cmd_construct(args) -> int:
    try:
        if args.kind == "third":
            x, w = family_from_construction("third", n=args.n)
            family = VectorFamily(x, w, gamma=1.0 / 3.0)
            name = f"third_n{args.n}.txt"
        else:
            x, w = family_from_construction("small", gamma=args.gamma, d=args.d, k=args.k, seed=args.seed)
            family = VectorFamily(x, w, gamma=args.gamma)
            name = f"small_g{args.gamma}_d{args.d}_s{args.seed}.txt"
    except (DomainError, ConstructionFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_or_print(format_family(family), args.out, name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critpoints", description="Critical-points verification simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario file and check its invariants")
    run.add_argument("scenario")
    run.add_argument("--out", help="directory for summary, event log and scan trace")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="disclosure table across the three margin regimes")
    sweep.add_argument("--gammas", nargs="+", required=True, help="values such as 0.5 1/3 0.25")
    sweep.add_argument("--d", type=int, required=True, help="ambient dimension")
    sweep.add_argument("--seeds", nargs="+", type=int, required=True)
    sweep.add_argument("--n", type=int, default=40, help="points per instance above 1/3")
    sweep.add_argument("--k", type=int, default=30, help="target family size below 1/3")
    sweep.add_argument("--out")
    sweep.set_defaults(func=cmd_sweep)

    dim = sub.add_parser("dim", help="exact (robust) Leave-One-Out dimension of a set system")
    dim.add_argument("system")
    dim.add_argument("--slack", type=int, default=0)
    dim.add_argument("--out")
    dim.set_defaults(func=cmd_dim)

    con = sub.add_parser("construct", help="write a skew-obtuse family")
    con.add_argument("kind", choices=("third", "small"))
    con.add_argument("--n", type=int, default=4)
    con.add_argument("--gamma", type=parse_number, default=0.2)
    con.add_argument("--d", type=int, default=300)
    con.add_argument("--k", type=int, default=20)
    con.add_argument("--seed", type=int, default=0)
    con.add_argument("--out")
    con.set_defaults(func=cmd_construct)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
