"""Discrete-time open quantum walk engine.

The walker's state is kept block diagonal in position: one N x N density
block per node.  One step applies

    rho_i <- sum_j  B^i_j rho_j B^i_j^dagger

over the self-loop operator B^i_i and every incoming edge.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .graph import WalkGraph
from .linalg import ShapeError, as_cmatrix, max_norm


class StructuralError(ValueError):
    pass


@dataclass(frozen=True)
class WalkState:
    """Density blocks for nodes 1..M; ``blocks[i - 1]`` belongs to node i."""

    blocks: np.ndarray
    step: int = 0
    time: float = 0.0

    def __post_init__(self):
        b = np.array(self.blocks, dtype=complex)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ShapeError(f"blocks must have shape (M, N, N), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def node_count(self) -> int:
        return self.blocks.shape[0]

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]

    def block(self, i: int) -> np.ndarray:
        return self.blocks[i - 1]

    def occupations(self) -> np.ndarray:
        return np.einsum("mii->m", self.blocks).real

    def total_trace(self) -> float:
        return float(self.occupations().sum())

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.blocks + np.conj(np.swapaxes(self.blocks, 1, 2)))
        return float(np.linalg.eigvalsh(herm).min())

    def check(self, tol: float = 1e-9):
        if abs(self.total_trace() - 1.0) > tol:
            raise ValueError(f"total trace {self.total_trace()!r} differs from 1")
        if self.min_eigenvalue() < -tol:
            raise ValueError("a density block is not positive semidefinite")

    @classmethod
    def localized(cls, node_count: int, node: int, rho) -> "WalkState":
        rho = as_cmatrix(rho)
        blocks = np.zeros((node_count, *rho.shape), dtype=complex)
        blocks[node - 1] = rho
        return cls(blocks)

    def mix(self, other: "WalkState", alpha: float) -> "WalkState":
        return WalkState(alpha * self.blocks + (1 - alpha) * other.blocks, self.step, self.time)


@dataclass(frozen=True)
class KrausTerms:
    """Flattened Kraus terms: ``ops[k]`` maps node ``src[k]`` to ``dst[k]`` (0-based)."""

    src: np.ndarray
    dst: np.ndarray
    ops: np.ndarray
    labels: tuple[str, ...]


@dataclass(frozen=True)
class TransitionTable:
    """Jump operators of a walk.

    ``edge_ops[(j, i)]`` is a tuple of Kraus operators for the move j -> i
    (usually one); ``loop_ops[j]`` is B^j_j.  Edges of the graph that carry
    no operator are treated as zero.
    """

    dim: int
    graph: WalkGraph
    edge_ops: Mapping[tuple[int, int], tuple[np.ndarray, ...]]
    loop_ops: Mapping[int, np.ndarray]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        edge_ops = {}
        for (j, i), ops in self.edge_ops.items():
            if (j, i) not in self.graph.edges:
                raise StructuralError(f"operator given for ({j}, {i}) which is not an edge")
            if isinstance(ops, np.ndarray) and ops.ndim == 2:
                ops = (ops,)
            edge_ops[(int(j), int(i))] = tuple(self._checked(op) for op in ops)
        loop_ops = {int(j): self._checked(op) for j, op in self.loop_ops.items()}
        object.__setattr__(self, "edge_ops", edge_ops)
        object.__setattr__(self, "loop_ops", loop_ops)

    def _checked(self, op) -> np.ndarray:
        op = np.array(as_cmatrix(op))
        if op.shape != (self.dim, self.dim):
            raise ShapeError(f"operator shape {op.shape} does not match dim {self.dim}")
        op.setflags(write=False)
        return op

    def edge_op(self, j: int, i: int) -> np.ndarray:
        """Single operator for j -> i (sum of squares is not implied; requires one Kraus term)."""
        ops = self.edge_ops.get((j, i), ())
        if not ops:
            return np.zeros((self.dim, self.dim), dtype=complex)
        if len(ops) != 1:
            raise StructuralError(f"edge {(j, i)} carries {len(ops)} Kraus operators")
        return ops[0]

    def outcomes(self, j: int) -> list[tuple[int, np.ndarray, str]]:
        """All (target, operator, label) branches leaving node j, loop first."""
        if j not in self.loop_ops:
            raise StructuralError(f"missing loop operator for node {j}")
        out = [(j, self.loop_ops[j], f"{j}->{j}")]
        for i in self.graph.neighbors_out(j):
            ops = self.edge_ops.get((j, i), ())
            for k, op in enumerate(ops):
                label = f"{j}->{i}" if len(ops) == 1 else f"{j}->{i}#{k}"
                out.append((i, op, label))
        return out

    @cached_property
    def terms(self) -> KrausTerms:
        src, dst, ops, labels = [], [], [], []
        for j in self.graph.nodes:
            for i, op, label in self.outcomes(j):
                src.append(j - 1)
                dst.append(i - 1)
                ops.append(op)
                labels.append(label)
        return KrausTerms(np.array(src), np.array(dst), np.array(ops).reshape(-1, self.dim, self.dim), tuple(labels))

    def max_outcomes(self) -> int:
        return max(len(self.outcomes(j)) for j in self.graph.nodes)


def normalization_defects(t: TransitionTable) -> dict[int, float]:
    """Max-norm of  sum_i B^i_j^dagger B^i_j - I  for every source node j."""
    eye = np.eye(t.dim)
    defects = {}
    for j in t.graph.nodes:
        acc = -eye.astype(complex)
        for _, op, _ in t.outcomes(j):
            acc = acc + op.conj().T @ op
        defects[j] = max_norm(acc)
    return defects


def validate_table(t: TransitionTable, norm_tol: float = 1e-10) -> list[tuple[int, float]]:
    """Return (node, defect) for every node whose normalization defect exceeds norm_tol."""
    return [(j, d) for j, d in normalization_defects(t).items() if d > norm_tol]


def step(t: TransitionTable, s: WalkState) -> WalkState:
    if s.dim != t.dim or s.node_count != t.graph.node_count:
        raise ShapeError(
            f"state has {s.node_count} blocks of dim {s.dim}; table expects "
            f"{t.graph.node_count} of dim {t.dim}"
        )
    terms = t.terms
    ops = terms.ops
    contrib = ops @ s.blocks[terms.src] @ np.conj(np.swapaxes(ops, 1, 2))
    out = np.zeros_like(s.blocks)
    np.add.at(out, terms.dst, contrib)
    return WalkState(out, s.step + 1, s.time + t.meta.get("delta", 1.0))


def run(t: TransitionTable, s0: WalkState, n_steps: int, record_every: int = 1) -> list[WalkState]:
    """Iterate the walk; snapshots at 0, record_every, 2*record_every, ... and n_steps."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    snaps = [s0]
    s = s0
    for n in range(1, n_steps + 1):
        s = step(t, s)
        if n % record_every == 0 or n == n_steps:
            snaps.append(s)
    return snaps
