"""Sample quantum trajectories of both walks at zero and finite temperature.

At <n>=0 the circle walker only moves right and the chain walker only moves left;
at finite temperature both directions occur.

    python scripts/sample_trajectories.py --temps 0 5 --n-traj 5 --plot
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from oqw.presets import ChainExampleParams, CircleExampleParams, chain_table, circle_table, initial_state
from oqw.trajectories import direction_frequencies, run_ensemble

from _common import pyplot, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--temps", type=float, nargs="+", default=[0.0, 5.0])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--n-traj", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/trajectories")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)

    runs = {}
    for name, params, table in (("circle", CircleExampleParams, circle_table),
                                ("chain", ChainExampleParams, chain_table)):
        for n in args.temps:
            p = params(n_mean=n)
            ens = run_ensemble(table(p), p.start_node, initial_state(p).blocks[p.start_node - 1],
                               args.steps, args.n_traj, args.seed, record_every=args.steps, keep_paths=True)
            runs[name, n] = ens.paths
            f = direction_frequencies(ens.paths, p.M if name == "circle" else None)
            print(f"{name:6s} <n>={n:<4g} right {f['right']:.3f} left {f['left']:.3f} moves {f['moves']}")
            write_csv(out / f"{name}_n{n:g}_paths.csv", ["step"] + [f"seed_{args.seed + k}" for k in range(args.n_traj)],
                      [[s] + [int(x) for x in ens.paths[:, s]] for s in range(args.steps + 1)])

    plt = pyplot() if args.plot else None
    if plt is None:
        return
    fig, axes = plt.subplots(2, len(args.temps), figsize=(4 * len(args.temps), 7), squeeze=False)
    for row, name in enumerate(("circle", "chain")):
        for col, n in enumerate(args.temps):
            for path in runs[name, n]:
                axes[row, col].plot(np.arange(len(path)), path, lw=0.8)
            axes[row, col].set(title=f"{name}, <n>={n:g}", xlabel="step", ylabel="node")
    fig.tight_layout()
    fig.savefig(out / "trajectories.png", dpi=120)
    print(f"wrote {out / 'trajectories.png'}")


if __name__ == "__main__":
    main()
