"""Occupation after N steps and total coherence sigma_x(t) for the circle and chain walks
at three bath temperatures.

    python scripts/walk_observables.py --steps 5000 --out out/observables --plot
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from oqw.discrete import run
from oqw.observables import moments_from_snapshots
from oqw.presets import ChainExampleParams, CircleExampleParams, chain_table, circle_table, initial_state

from _common import pyplot, write_csv

EXAMPLES = {
    "circle": (CircleExampleParams, circle_table),
    "chain": (ChainExampleParams, chain_table),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--record-every", type=int, default=20)
    ap.add_argument("--temps", type=float, nargs="+", default=[10.0, 1.0, 0.1])
    ap.add_argument("--loop-form", choices=["exact", "first_order"], default="exact")
    ap.add_argument("--out", default="out/observables")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)

    results = {}
    for name, (params, table) in EXAMPLES.items():
        for n in args.temps:
            p = params(n_mean=n, loop_form=args.loop_form)
            ms = moments_from_snapshots(run(table(p), initial_state(p), args.steps, args.record_every),
                                        use_steps=True)
            results[name, n] = ms
            print(f"{name:6s} <n>={n:<5g} mu={ms.mu[-1]:8.3f} var={ms.var[-1]:8.3f} "
                  f"sigma_x={ms.coherence_x[-1]:+.4e}")
        temps = args.temps
        write_csv(out / f"{name}_occupation.csv", ["node"] + [f"P_n{n:g}" for n in temps],
                  [[i + 1] + [float(results[name, n].occupation[-1, i]) for n in temps]
                   for i in range(p.M)])
        t = results[name, temps[0]].times
        write_csv(out / f"{name}_coherence.csv", ["step"] + [f"sigma_x_n{n:g}" for n in temps],
                  [[int(t[k])] + [float(results[name, n].coherence_x[k]) for n in temps] for k in range(len(t))])

    plt = pyplot() if args.plot else None
    if plt is None:
        return
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for row, name in enumerate(EXAMPLES):
        for n in args.temps:
            ms = results[name, n]
            axes[row, 0].plot(np.arange(1, ms.occupation.shape[1] + 1), ms.occupation[-1], label=f"<n>={n:g}")
            axes[row, 1].plot(ms.times, ms.coherence_x, label=f"<n>={n:g}")
        axes[row, 0].set(title=f"{name}: P(i) after {args.steps} steps", xlabel="node i")
        axes[row, 1].set(title=f"{name}: total coherence", xlabel="step", ylabel="sigma_x")
        axes[row, 0].legend()
    fig.tight_layout()
    fig.savefig(out / "observables.png", dpi=120)
    print(f"wrote {out / 'observables.png'}")


if __name__ == "__main__":
    main()
