"""Small helpers shared by the experiment scripts."""
from __future__ import annotations

import csv
from pathlib import Path


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([format(x, ".10g") if isinstance(x, float) else x for x in r])
    print(f"wrote {path}")
    return path


def pyplot():
    """matplotlib.pyplot with a non-interactive backend, or None if unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plots")
        return None
    return plt
