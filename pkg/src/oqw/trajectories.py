"""Monte Carlo unraveling of the discrete walk into single-walker trajectories.

Each step picks outcome k with probability p_k = Tr[B_k rho B_k^dagger] (renormalized
by their sum) and collapses rho to B_k rho B_k^dagger / p_k at the target node.

Randomness: one numpy Philox4x64 stream per trajectory, keyed by its integer seed,
consuming exactly one uniform double per step.  Ensembles are simulated in vectorized
batches; a trajectory's path depends only on its own seed, so batch size and thread
count never change results.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discrete import TransitionTable
from .graph import circle_displacement
from .linalg import DomainError, as_cmatrix

log = logging.getLogger(__name__)

MIN_PROB = 1e-15
UNIFORM_CHUNK = 1024
BATCH = 2048


class DegenerateDistributionError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def thread_count() -> int:
    env = os.environ.get("OQW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DomainError(f"OQW_THREADS must be an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


@dataclass
class TrajectoryRecord:
    seed: int
    steps: np.ndarray
    nodes: np.ndarray
    labels: list[str]  # labels[k] is the operator applied to reach nodes[k]; "" at start
    states: np.ndarray  # (n_points, N, N), each of trace 1
    max_defect: float = 0.0

    def __len__(self):
        return len(self.steps)

    def rows(self):
        for k in range(len(self.steps)):
            yield int(self.steps[k]), int(self.nodes[k]), self.labels[k], self.states[k]

    def check(self, table: TransitionTable, tol: float = 1e-10):
        edges = table.graph.edges
        for a, b in zip(self.nodes[:-1], self.nodes[1:]):
            if a != b and (int(a), int(b)) not in edges:
                raise AssertionError(f"jump {a}->{b} is not an edge")
        tr = np.einsum("kii->k", self.states).real
        if np.abs(tr - 1).max() > tol:
            raise AssertionError("state trace differs from 1")
        herm = 0.5 * (self.states + np.conj(np.swapaxes(self.states, 1, 2)))
        if np.linalg.eigvalsh(herm).min() < -tol:
            raise AssertionError("state is not positive semidefinite")


@dataclass
class EnsembleStats:
    n_traj: int
    base_seed: int
    steps: np.ndarray  # recorded step indices
    counts: np.ndarray  # (n_recorded, M) histogram of node 1..M
    mean: np.ndarray
    var: np.ndarray
    paths: np.ndarray | None = None  # (n_traj, n_steps + 1) when requested
    max_defect: float = 0.0
    meta: dict = field(default_factory=dict)

    def distribution(self, k: int) -> np.ndarray:
        return self.counts[k] / self.n_traj


class _Outcomes:
    """Per-node outcome arrays padded to a common branch count."""

    def __init__(self, t: TransitionTable):
        M, n = t.graph.node_count, t.dim
        outs = [t.outcomes(j) for j in t.graph.nodes]
        K = max(len(o) for o in outs)
        self.ops = np.zeros((M, K, n, n), dtype=complex)
        self.targets = np.tile(np.arange(1, M + 1)[:, None], (1, K))
        self.labels = []
        for j, o in enumerate(outs):
            labs = []
            for k, (i, op, lab) in enumerate(o):
                self.ops[j, k] = op
                self.targets[j, k] = i
                labs.append(lab)
            self.labels.append(labs)
        self.ops_dag = np.conj(np.swapaxes(self.ops, -1, -2))


def _branch_probs(out: _Outcomes, nodes: np.ndarray, rho: np.ndarray):
    ops = out.ops[nodes - 1]  # (T, K, n, n)
    cand = ops @ rho[:, None] @ out.ops_dag[nodes - 1]
    p = np.einsum("tkii->tk", cand).real
    return cand, np.clip(p, 0.0, None)


def unravel_step(t: TransitionTable, node: int, rho, u: float | np.random.Generator):
    """Sample one step from ``node`` in internal state ``rho``.

    ``u`` is a uniform number in [0, 1) or a Generator to draw it from.
    Returns (new_node, new_rho, label, probabilities).
    """
    rho = as_cmatrix(rho)
    if isinstance(u, np.random.Generator):
        u = float(u.random())
    outs = t.outcomes(node)
    cand = [op @ rho @ op.conj().T for _, op, _ in outs]
    p = np.array([max(np.trace(c).real, 0.0) for c in cand])
    if p.max() < MIN_PROB:
        raise DegenerateDistributionError(f"all branch probabilities below {MIN_PROB} at node {node}")
    cum = np.cumsum(p)
    k = int(np.sum(cum <= u * cum[-1]))
    return outs[k][0], cand[k] / p[k], outs[k][2], p


def _simulate(t: TransitionTable, start_node: int, rho0, n_steps: int, seeds, record_every: int,
              keep_states: bool, keep_paths: bool):
    if not 1 <= start_node <= t.graph.node_count:
        raise DomainError(f"start node {start_node} outside 1..{t.graph.node_count}")
    rho0 = as_cmatrix(rho0)
    if abs(np.trace(rho0).real - 1) > 1e-10:
        raise DomainError("initial internal state must have unit trace")
    out = _Outcomes(t)
    T, M = len(seeds), t.graph.node_count
    rngs = [make_rng(s) for s in seeds]
    nodes = np.full(T, start_node, dtype=np.int64)
    rho = np.broadcast_to(rho0, (T, *rho0.shape)).copy()
    rec_steps = [0]
    hist = [np.bincount(nodes - 1, minlength=M)]
    paths = [nodes.copy()] if keep_paths else None
    states = [rho.copy()] if keep_states else None
    labels = [[""] * T] if keep_states else None
    defect = 0.0
    rows = np.arange(T)
    uni = None
    for n in range(n_steps):
        c = n % UNIFORM_CHUNK
        if c == 0:
            size = min(UNIFORM_CHUNK, n_steps - n)
            uni = np.stack([g.random(size) for g in rngs])
        cand, p = _branch_probs(out, nodes, rho)
        tot = p.sum(axis=1)
        if tot.min() < MIN_PROB or (p.max(axis=1) < MIN_PROB).any():
            bad = int(nodes[np.argmin(p.max(axis=1))])
            raise DegenerateDistributionError(f"all branch probabilities below {MIN_PROB} at node {bad}")
        defect = max(defect, float(np.abs(tot - 1).max()))
        cum = np.cumsum(p, axis=1)
        k = np.sum(cum <= (uni[:, c] * tot)[:, None], axis=1)
        pk = p[rows, k]
        rho = cand[rows, k] / pk[:, None, None]
        new_nodes = out.targets[nodes - 1, k]
        if keep_states:
            labels.append([out.labels[j - 1][kk] for j, kk in zip(nodes, k)])
            states.append(rho.copy())
        nodes = new_nodes
        if keep_paths:
            paths.append(nodes.copy())
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            rec_steps.append(n + 1)
            hist.append(np.bincount(nodes - 1, minlength=M))
    if defect > 1e-6:
        log.info("max branch-probability defect %.3e (renormalized)", defect)
    return {
        "steps": np.array(rec_steps),
        "counts": np.array(hist),
        "paths": np.array(paths).T if keep_paths else None,
        "states": np.array(states) if keep_states else None,
        "labels": labels,
        "defect": defect,
    }


def run_trajectory(t: TransitionTable, start_node: int, rho0, n_steps: int, seed: int) -> TrajectoryRecord:
    """One trajectory; byte-identical for identical inputs."""
    if n_steps < 0:
        raise DomainError("n_steps must be >= 0")
    res = _simulate(t, start_node, rho0, n_steps, [seed], 1, keep_states=True, keep_paths=True)
    return TrajectoryRecord(
        seed=int(seed),
        steps=np.arange(n_steps + 1),
        nodes=res["paths"][0],
        labels=[lab[0] for lab in res["labels"]],
        states=res["states"][:, 0],
        max_defect=res["defect"],
    )


def run_ensemble(t: TransitionTable, start_node: int, rho0, n_steps: int, n_traj: int, base_seed: int,
                 record_every: int = 1, keep_paths: bool = False, threads: int | None = None) -> EnsembleStats:
    """Aggregate trajectories with seeds base_seed, ..., base_seed + n_traj - 1."""
    if n_traj < 1:
        raise DomainError("n_traj must be >= 1")
    if n_steps < 0 or record_every < 1:
        raise DomainError("need n_steps >= 0 and record_every >= 1")
    seeds = [base_seed + k for k in range(n_traj)]
    batches = [seeds[i:i + BATCH] for i in range(0, n_traj, BATCH)]
    threads = thread_count() if threads is None else max(1, threads)

    def work(b):
        return _simulate(t, start_node, rho0, n_steps, b, record_every, False, keep_paths)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, batches))  # map keeps seed order
    else:
        results = [work(b) for b in batches]
    counts = sum(r["counts"] for r in results)
    paths = np.concatenate([r["paths"] for r in results]) if keep_paths else None
    pos = np.arange(1, t.graph.node_count + 1, dtype=float)
    mean = counts @ pos / n_traj
    var = counts @ pos ** 2 / n_traj - mean ** 2
    return EnsembleStats(n_traj, base_seed, results[0]["steps"], counts, mean, var, paths,
                         max(r["defect"] for r in results), {"threads": threads})


def step_directions(paths: np.ndarray, M: int | None = None) -> np.ndarray:
    """Signed move per step (+1 right, -1 left, 0 stay); circle-aware when M is given."""
    a, b = paths[:, :-1], paths[:, 1:]
    if M is None:
        return np.sign(b - a)
    d = (b - a) % M
    return np.where(d == 0, 0, np.where(d > M // 2, -1, 1))


def direction_frequencies(paths: np.ndarray, M: int | None = None) -> dict[str, float]:
    """Fraction of moves (stays excluded) going right and left."""
    d = step_directions(paths, M)
    moves = np.count_nonzero(d)
    if moves == 0:
        return {"right": 0.0, "left": 0.0, "moves": 0}
    return {"right": np.count_nonzero(d > 0) / moves, "left": np.count_nonzero(d < 0) / moves, "moves": moves}


__all__ = [
    "DegenerateDistributionError",
    "TrajectoryRecord",
    "EnsembleStats",
    "unravel_step",
    "run_trajectory",
    "run_ensemble",
    "make_rng",
    "step_directions",
    "direction_frequencies",
    "circle_displacement",
]
