#!/usr/bin/env python3
"""Replay the three discrete counterexamples: brute-force oracle, multipliers and maximized Hamiltonians."""

import argparse

import numpy as np

from tspmp.certificate import certify, derive_multipliers
from tspmp.cli import examples_summary, format_examples
from tspmp.dynamics import simulate
from tspmp.registry import PAPER_EXAMPLES, get_problem
from tspmp.solver import brute_force_discrete


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid-points", type=int, default=11, help="control values per step for the oracle")
    args = ap.parse_args()
    values = np.linspace(0.0, 1.0, args.grid_points)
    for name in PAPER_EXAMPLES:
        p = get_problem(name)
        b_cands = [1.0, 2.0, 3.0] if p.free_time else None
        bf = brute_force_discrete(p, values, b_candidates=b_cands)
        ctrl = bf.control(p)
        ext = derive_multipliers(p, simulate(p, ctrl, b=bf.b)).extremal
        rep = certify(p, ext)
        print(f"{name}: oracle u*={bf.u[:, 0].tolist()} b*={bf.b:g} cost={bf.cost:.6g} "
              f"p={ext.p.values[:, 0].tolist()} p0={ext.p0:g} verdict={rep.overall}")
    print()
    print(format_examples(examples_summary()), end="")


if __name__ == "__main__":
    main()
