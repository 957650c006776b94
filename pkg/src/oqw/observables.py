"""Walker statistics from snapshots, plus closed-form and ODE oracles for the circle walk's
asymptotic drift and spreading rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .continuous import STEPPERS
from .discrete import WalkState
from .graph import circle_displacement
from .linalg import SIGMA_X, DomainError

# a circle run counts as wrapped once this much probability sits within
# WRAP_MARGIN nodes of the antipode of the start node
WRAP_MARGIN = 10
WRAP_MASS = 1e-6


@dataclass
class MomentSeries:
    times: np.ndarray
    occupation: np.ndarray  # (n_times, M)
    mu: np.ndarray
    var: np.ndarray
    coherence_x: np.ndarray
    positions: np.ndarray  # index assigned to each node (unwrapped on circles)
    wrapped: np.ndarray  # per time, True if the circle unwrap is unreliable

    def __len__(self):
        return len(self.times)

    def usable(self) -> np.ndarray:
        return ~self.wrapped

    def slope(self, which: str = "mu", window_fraction: float = 0.5) -> float:
        ok = self.usable()
        y = getattr(self, which)
        return fit_asymptotic_slope(np.column_stack([self.times[ok], y[ok]]), window_fraction)

    def first_passage(self, threshold: float, which: str = "coherence_x") -> float | None:
        """First recorded time at which |series| drops below threshold."""
        below = np.nonzero(np.abs(getattr(self, which)) < threshold)[0]
        return float(self.times[below[0]]) if len(below) else None


def unwrapped_positions(M: int, start: int) -> np.ndarray:
    """Position of nodes 1..M measured as start + shortest signed displacement."""
    return np.array([start + circle_displacement(M, start, i) for i in range(1, M + 1)], dtype=float)


def moments_from_snapshots(snapshots, unwrap_start: int | None = None, use_steps: bool = False) -> MomentSeries:
    """mu, sigma^2, sigma_x and occupations for every snapshot.

    With ``unwrap_start`` the nodes of a circle are relabelled by their signed distance
    from that node, and snapshots with mass near the antipode are flagged as wrapped.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise DomainError("no snapshots")
    dims = {s.blocks.shape[1:] for s in snapshots}
    counts = {s.node_count for s in snapshots}
    if len(dims) != 1 or len(counts) != 1:
        raise DomainError("snapshots do not share a common shape")
    M = snapshots[0].node_count
    blocks = np.stack([s.blocks for s in snapshots])
    occ = np.einsum("tmii->tm", blocks).real
    if unwrap_start is None:
        pos = np.arange(1, M + 1, dtype=float)
        wrapped = np.zeros(len(snapshots), dtype=bool)
    else:
        pos = unwrapped_positions(M, unwrap_start)
        dist = np.abs(pos - unwrap_start)
        near = dist >= (M // 2) - WRAP_MARGIN
        wrapped = occ[:, near].sum(axis=1) > WRAP_MASS
    mu = occ @ pos
    var = occ @ (pos ** 2) - mu ** 2
    cx = np.einsum("tmij,ji->t", blocks, SIGMA_X).real
    times = np.array([s.step if use_steps else s.time for s in snapshots], dtype=float)
    return MomentSeries(times, occ, mu, var, cx, pos, wrapped)


def fit_asymptotic_slope(series, window_fraction: float = 0.5) -> float:
    """Least-squares slope of y against t over the trailing ``window_fraction`` of the series."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("series must be a sequence of (t, y) pairs")
    if not 0 < window_fraction <= 1:
        raise DomainError("window_fraction must be in (0, 1]")
    t0 = arr[-1, 0] - window_fraction * (arr[-1, 0] - arr[0, 0]) if len(arr) else 0.0
    win = arr[arr[:, 0] >= t0 - 1e-12]
    if len(win) < 10:
        raise DomainError(f"need at least 10 points in the fit window, got {len(win)}")
    return float(np.polyfit(win[:, 0], win[:, 1], 1)[0])


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


@dataclass(frozen=True)
class AsymptoticRates:
    gamma: float
    lambda_field: float
    n_mean: float
    omega_big: float
    v_mu: float
    v_sigma2: float  # three-line closed form as printed
    v_sigma2_exact: float  # corrected closed form (leading-eigenvalue curvature)

    def to_dict(self) -> dict:
        return asdict(self)


def v_sigma2_printed(gamma: float, lam: float, n_mean: float) -> float:
    m = 2 * n_mean + 1
    om2 = 8 * lam ** 2 + gamma ** 2 * m ** 2
    return (gamma / 2 * m - 1.5 * gamma ** 7 * m ** 5 / om2 ** 3 + 3 * gamma ** 5 * m ** 3 / om2 ** 2
            - gamma ** 3 * m * (n_mean ** 2 + n_mean + 1) / om2)


def v_sigma2_exact(gamma: float, lam: float, n_mean: float) -> float:
    """Variance growth rate from the full collective-variable system.

    Differs from the printed form only in the last term, whose factor
    (n^2 + n + 1) must read 2(n^2 + n + 1).
    """
    m = 2 * n_mean + 1
    om2 = 8 * lam ** 2 + gamma ** 2 * m ** 2
    g2, l2 = gamma ** 2, lam ** 2
    return 4 * gamma * l2 * m * (g2 ** 2 * m ** 4 + 16 * g2 * l2 * m ** 2 - 24 * g2 * l2 + 64 * l2 ** 2) / om2 ** 3


def analytic_rates(gamma: float, lam: float, n_mean: float) -> AsymptoticRates:
    if gamma <= 0 or n_mean < 0:
        raise DomainError("need gamma > 0 and n_mean >= 0")
    m = 2 * n_mean + 1
    om2 = 8 * lam ** 2 + gamma ** 2 * m ** 2
    return AsymptoticRates(
        gamma, lam, n_mean, math.sqrt(om2), 4 * gamma * lam ** 2 / om2,
        v_sigma2_printed(gamma, lam, n_mean), v_sigma2_exact(gamma, lam, n_mean),
    )


def g2_matrix(gamma: float, lam: float, n_mean: float) -> np.ndarray:
    g = gamma * (2 * n_mean + 1)
    return np.array([[-g, -2 * lam], [2 * lam, -g / 2]], dtype=float)


def g2_spectral(gamma: float, lam: float, n_mean: float):
    """Eigenvalues (lambda_+, lambda_-) and projectors (Pi_+, Pi_-) of G2 in closed form.

    omega = sqrt(g^2 - 64 lambda^2) is complex when the radicand is negative.
    """
    g = gamma * (2 * n_mean + 1)
    omega = np.sqrt(complex(g * g - 64 * lam * lam))
    if omega == 0:
        raise DomainError("G2 is defective at g^2 = 64 lambda^2")
    lp, lm = -0.75 * g + omega / 4, -0.75 * g - omega / 4
    G = g2_matrix(gamma, lam, n_mean).astype(complex)
    eye = np.eye(2)
    pp = (2 / omega) * (G - lm * eye)
    pm = -(2 / omega) * (G - lp * eye)
    return (lp, lm), (pp, pm)


# collective variables, in order
ORACLE_VARS = ("P_s", "Z_s", "X_s", "P", "Z", "X", "PP")


def _oracle_rhs(gamma, lam, n_mean):
    g = gamma * (2 * n_mean + 1)

    def f(y):
        ps, zs, xs, p, z, x, pp = y
        return np.array([
            0.0,
            -g * zs - 2 * lam * xs - gamma * ps,
            2 * lam * zs - 0.5 * g * xs,
            0.5 * g * zs + 0.5 * gamma * ps,
            -g * z - 2 * lam * x - gamma * p - 0.5 * gamma * zs - 0.5 * g * ps,
            2 * lam * z - 0.5 * g * x,
            gamma * p + g * z + 0.5 * gamma * zs + 0.5 * g * ps,
        ])
    return f


def appendix_oracle(gamma: float, lam: float, n_mean: float, t_final: float, dt: float,
                    start: float = 0.0, z0: float = 0.0, x0: float = 0.0, scheme: str = "rk4",
                    record_every: int = 1):
    """Integrate the closed collective-variable system for the circle walk on an infinite line.

    Initial state: unit mass at position ``start`` with internal Bloch components
    (Z, X) = (z0, x0); the default is the maximally mixed state.
    Returns (times, mu, var, trajectory) with trajectory columns ORACLE_VARS.
    """
    if dt <= 0 or t_final < 0:
        raise DomainError("need dt > 0 and t_final >= 0")
    f = _oracle_rhs(gamma, lam, n_mean)
    step = STEPPERS[scheme]
    n = int(round(t_final / dt))
    y = np.array([1.0, z0, x0, start, start * z0, start * x0, start * start])
    out = [y]
    times = [0.0]
    for k in range(1, n + 1):
        y = step(f, y, dt)
        if k % record_every == 0 or k == n:
            out.append(y)
            times.append(k * dt)
    traj = np.array(out)
    mu = traj[:, 3]
    var = traj[:, 6] - mu ** 2
    return np.array(times), mu, var, traj
