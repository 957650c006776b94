"""Continuous-time walk: fixed-step integration of d rho_i/dt = K_i(rho_1, ..., rho_M)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from .discrete import WalkState
from .linalg import ShapeError
from .microscopic import GeneratorSpec, StepSizeError

log = logging.getLogger(__name__)

SCHEMES = ("euler", "rk4")
# dt * (max total loss rate) must not exceed this
STABILITY_LIMIT = {"euler": 0.1, "rk4": 0.5}


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_final: float
    scheme: str = "rk4"
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


class CompiledGenerator:
    """Sparse superoperator form of a GeneratorSpec acting on the row-major flattened blocks.

    d rho_i = -(G_i rho_i + rho_i G_i^dagger) + sum_k L_k rho_src(k) L_k^dagger,
    G_i = K_i / 2 + i H_i with K_i the summed loss operator of node i.
    Row-major vec(A X B) = (A kron B^T) vec(X).
    """

    def __init__(self, g: GeneratorSpec):
        self.spec = g
        self.dim = n = g.dim
        self.node_count = m = g.graph.node_count
        eye = np.eye(n)
        b = n * n
        rows, cols, vals = [], [], []

        def put(dst, src, block):
            r, c = np.nonzero(block)
            rows.append(dst * b + r)
            cols.append(src * b + c)
            vals.append(block[r, c])

        for i in g.graph.nodes:
            eff = 0.5 * g.loss_operator(i) + 1j * g.hamiltonian(i)
            put(i - 1, i - 1, -(np.kron(eff, eye) + np.kron(eye, eff.conj())))
        for t in g.jumps:
            if t.rate > 0:
                put(t.dst - 1, t.src - 1, t.rate * np.kron(t.op, t.op.conj()))
        if rows:
            rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        self.matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(m * b, m * b), dtype=complex)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ rho.reshape(-1)).reshape(rho.shape)


@lru_cache(maxsize=8)
def _compiled(g: GeneratorSpec) -> CompiledGenerator:
    return CompiledGenerator(g)


def compile_generator(g: GeneratorSpec) -> CompiledGenerator:
    try:
        return _compiled(g)
    except TypeError:  # unhashable spec contents
        return CompiledGenerator(g)


def rhs(g: GeneratorSpec, s: WalkState) -> np.ndarray:
    """Per-node derivatives d rho_i/dt, shape (M, N, N)."""
    if s.dim != g.dim or s.node_count != g.graph.node_count:
        raise ShapeError("state does not match generator dimensions")
    return compile_generator(g)(s.blocks)


def preflight(g: GeneratorSpec, cfg: IntegratorConfig) -> float:
    """Return dt * max loss rate; raise StepSizeError above the scheme's limit."""
    load = cfg.dt * g.max_loss_rate()
    if load > STABILITY_LIMIT[cfg.scheme]:
        raise StepSizeError(
            f"dt={cfg.dt} too large for {cfg.scheme}: dt*max_loss_rate={load:.3g} "
            f"> {STABILITY_LIMIT[cfg.scheme]}"
        )
    return load


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(f, y, dt):
    return y + dt * f(y)


STEPPERS = {"euler": euler_step, "rk4": rk4_step}


def integrate(g: GeneratorSpec, s0: WalkState, cfg: IntegratorConfig) -> list[WalkState]:
    """Integrate from s0 with a fixed step; snapshots every ``record_every`` steps and at the end."""
    preflight(g, cfg)
    if s0.dim != g.dim or s0.node_count != g.graph.node_count:
        raise ShapeError("initial state does not match generator dimensions")
    f = compile_generator(g)
    stepper = STEPPERS[cfg.scheme]
    n_steps = cfg.n_steps
    y = np.array(s0.blocks)
    snaps = [s0]
    for n in range(1, n_steps + 1):
        y = stepper(f, y, cfg.dt)
        if n % cfg.record_every == 0 or n == n_steps:
            snaps.append(WalkState(y, n, n * cfg.dt))
    drift = abs(snaps[-1].total_trace() - s0.total_trace())
    if drift > 1e-8:
        log.warning("trace drift %.3e over %d steps", drift, n_steps)
    worst = min(s.min_eigenvalue() for s in snaps)
    if worst < -1e-7:
        log.warning("positivity defect: min block eigenvalue %.3e", worst)
    return snaps
