#!/usr/bin/env python3
"""Finite-difference convergence of needle variations on the registry problems; writes one CSV per check."""

import argparse
from pathlib import Path

import numpy as np

from tspmp.dynamics import simulate
from tspmp.registry import default_control, get_problem
from tspmp.variations import default_steps, fd_check_init, fd_check_rd, fd_check_rs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--problems", nargs="+", default=["hybrid_demo", "hybrid_sin", "cantor_sin"])
    ap.add_argument("--h", type=float, default=1e-2)
    ap.add_argument("--out", type=Path, default=None, help="directory for alpha,error CSV files")
    ap.add_argument("--lo", type=int, default=10, help="largest step is 2^-lo")
    ap.add_argument("--hi", type=int, default=20, help="smallest step is 2^-hi")
    args = ap.parse_args()
    steps = default_steps(args.lo, args.hi)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'problem':<14} {'needle':<10} {'order':>7} {'smallest-step error':>20} monotone")
    for name in args.problems:
        p = get_problem(name)
        u = default_control(name)
        base = simulate(p, u, h=args.h)
        lo, hi = p.omega.bounding_box(1.0)
        checks = [(f"rs@{r:.3g}", lambda r=r: fd_check_rs(p, u, None, r, lo, steps, h=args.h)) for r in p.timescale.rs_points()]
        dense = [t for t in base.grid[:-1] if not p.timescale.is_rs(t)]
        if dense:
            s = dense[len(dense) // 3]
            checks.append((f"rd@{s:.3g}", lambda s=s: fd_check_rd(p, u, None, s, hi, steps, h=args.h)))
        checks.append(("init", lambda: fd_check_init(p, u, None, np.ones(p.n), steps, h=args.h)))
        for label, run in checks:
            res = run()
            print(f"{name:<14} {label:<10} {res.order:7.3f} {res.smallest_step_error:20.3e} {res.monotone()}")
            if args.out:
                res.to_csv(args.out / f"{name}_{label.replace('@', '_')}.csv")


if __name__ == "__main__":
    main()
