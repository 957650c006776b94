"""Walk graphs: node set 1..M plus directed edges (j, i) meaning j -> i."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .linalg import DomainError

TOPOLOGIES = ("circle", "chain", "custom")


@dataclass(frozen=True)
class WalkGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]
    topology_tag: str = "custom"

    def __post_init__(self):
        if self.node_count < 1:
            raise DomainError("node_count must be positive")
        if self.topology_tag not in TOPOLOGIES:
            raise DomainError(f"unknown topology {self.topology_tag!r}")
        for j, i in self.edges:
            if not (1 <= j <= self.node_count and 1 <= i <= self.node_count):
                raise DomainError(f"edge {(j, i)} outside nodes 1..{self.node_count}")
            if i == j:
                raise DomainError(f"self-loop {(j, i)} must not be stored as an edge")

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    @cached_property
    def _in(self) -> dict[int, list[int]]:
        table = {i: [] for i in self.nodes}
        for j, i in self.edges:
            table[i].append(j)
        return {i: sorted(js) for i, js in table.items()}

    @cached_property
    def _out(self) -> dict[int, list[int]]:
        table = {j: [] for j in self.nodes}
        for j, i in self.edges:
            table[j].append(i)
        return {j: sorted(is_) for j, is_ in table.items()}

    def _check(self, i: int):
        if not 1 <= i <= self.node_count:
            raise DomainError(f"node {i} outside 1..{self.node_count}")

    def neighbors_in(self, i: int) -> list[int]:
        self._check(i)
        return list(self._in[i])

    def neighbors_out(self, j: int) -> list[int]:
        self._check(j)
        return list(self._out[j])

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def make_circle(M: int) -> WalkGraph:
    if M < 2:
        raise DomainError("a circle needs M >= 2 nodes")
    edges = set()
    for i in range(1, M + 1):
        nxt = i % M + 1
        edges.add((i, nxt))
        edges.add((nxt, i))
    return WalkGraph(M, frozenset(edges), "circle")


def make_chain(M: int) -> WalkGraph:
    if M < 2:
        raise DomainError("a chain needs M >= 2 nodes")
    edges = set()
    for i in range(1, M):
        edges.add((i, i + 1))
        edges.add((i + 1, i))
    return WalkGraph(M, frozenset(edges), "chain")


def make_custom(M: int, edges) -> WalkGraph:
    return WalkGraph(M, frozenset((int(j), int(i)) for j, i in edges), "custom")


def circle_displacement(M: int, source: int, target: int) -> int:
    """Signed shortest displacement from source to target on a circle of M nodes."""
    d = (target - source) % M
    return d - M if d > M // 2 else d
