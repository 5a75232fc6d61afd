#!/usr/bin/env python3
"""Shoot for an extremal on T = [0,1] ∪ {1.5, 2} ∪ [2.5,3] and print its certificate."""

import argparse

from tspmp.certificate import certify
from tspmp.io import dumps, trajectory_to_csv
from tspmp.registry import get_problem, shooting_guess
from tspmp.solver import ShootingOptions, shooting_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=1e-2)
    ap.add_argument("--csv", help="write the trajectory to this CSV file")
    ap.add_argument("--json", help="write the extremal and report to this JSON file")
    args = ap.parse_args()
    p = get_problem("hybrid_demo")
    res = shooting_solve(p, shooting_guess("hybrid_demo"), ShootingOptions(h=args.h))
    rep = certify(p, res.extremal)
    ext = res.extremal
    print(f"shooting defect {res.defect:.2e} after {res.nfev} evaluations, Jacobian condition {res.jacobian_cond:.2e}")
    print(f"multipliers p0={ext.p0:.6g} psi={ext.psi.round(6).tolist()}  cost={ext.trajectory.cost:.6g}")
    for c in rep.rs:
        print(f"  RS r={c.r:g}: dH/du={c.grad_u.round(8).tolist()} worst residual {c.worst:.2e} {'pass' if c.passed else 'FAIL'}")
    gap, s = rep.worst_rd
    print(f"  RD: {len(rep.rd)} grid points, worst gap {gap:.2e} at t={s:g}")
    for k, v in rep.verdicts.items():
        print(f"  {k:<22} {v}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(trajectory_to_csv(ext.trajectory))
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(dumps({"extremal": ext, "report": rep.to_json()}))
    return rep.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
