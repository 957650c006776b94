"""Total-variation distance between trajectory histograms and the averaged walk
as the number of trajectories grows.

    python scripts/unraveling_convergence.py --sizes 100 1000 10000
"""
from __future__ import annotations

import argparse
from pathlib import Path

from oqw.discrete import run
from oqw.observables import total_variation
from oqw.presets import CircleExampleParams, circle_table, initial_state
from oqw.trajectories import run_ensemble

from _common import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-mean", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--record-every", type=int, default=500)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/unraveling")
    args = ap.parse_args()

    p = CircleExampleParams(n_mean=args.n_mean)
    t = circle_table(p)
    s0 = initial_state(p)
    exact = {s.step: s.occupations() for s in run(t, s0, args.steps, args.record_every)}
    rows = []
    for size in args.sizes:
        ens = run_ensemble(t, p.start_node, s0.blocks[p.start_node - 1], args.steps, size, args.seed,
                           record_every=args.record_every)
        for k, step in enumerate(ens.steps):
            if int(step) in exact and step > 0:
                tv = total_variation(ens.distribution(k), exact[int(step)])
                rows.append([size, int(step), tv])
                print(f"n_traj={size:6d} step={int(step):5d} TV={tv:.4f}")
    write_csv(Path(args.out) / "tv_distance.csv", ["n_traj", "step", "tv"], rows)


if __name__ == "__main__":
    main()
