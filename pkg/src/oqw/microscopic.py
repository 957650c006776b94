"""From system/bath Hamiltonians to walk generators and jump operators.

Pipeline::

    MicroscopicModel --eigen_decompose_coins--> EigenOperatorSet
                     --build_generator-------> GeneratorSpec
                     --discretize------------> TransitionTable

Conventions
-----------
A coin is stored under the directed key ``(src, dst)``: the walker moving
src -> dst has its internal state acted on by ``A``; the Hermitian coupling
also contains ``A^dagger`` for the move dst -> src.  An eigen-component
``A(w) = sum Pi_dst(l') A Pi_src(l)`` with ``w = l - l'`` is the energy released
by the forward move.  Rates follow the thermal-bath form

    gamma(+w) = gamma_se * n(w)          (absorbing w > 0)
    gamma(-w) = gamma_se * (n(w) + 1)    (emitting w > 0)

so the forward jump has rate ``gamma(-w)`` and the backward jump ``gamma(+w)``.
Components at w = 0 (pure dephasing couplings) use the bath's reference
frequency, with the forward direction of the coin taken as the emitting one.
Lamb-shift terms are not represented.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .discrete import TransitionTable, normalization_defects
from .graph import WalkGraph
from .linalg import (
    DomainError,
    as_cmatrix,
    hermitian_eigen,
    is_hermitian,
    max_norm,
    psd_sqrt,
    spectral_norm,
    unitary_exp,
)


class SingularRateError(ValueError):
    pass


class StepSizeError(ValueError):
    pass


Edge = tuple[int, int]


@dataclass(frozen=True)
class BathSpec:
    """Thermal bath shared by all edges (one independent reservoir per coupled pair).

    ``inv_temperature`` is beta; ``math.inf`` encodes T = 0.  ``gamma_se`` is
    either one spontaneous-emission rate for all edges or a mapping keyed by
    coin edge.
    """

    inv_temperature: float
    gamma_se: float | Mapping[Edge, float]
    reference_frequency: float | None = None

    def __post_init__(self):
        if not (self.inv_temperature >= 0):
            raise DomainError("inverse temperature must be >= 0 (use math.inf for T = 0)")
        rates = self.gamma_se.values() if isinstance(self.gamma_se, Mapping) else [self.gamma_se]
        if any(not (r > 0) for r in rates):
            raise DomainError("spontaneous emission rates must be > 0")
        if self.reference_frequency is not None and not self.reference_frequency > 0:
            raise DomainError("reference frequency must be > 0")

    @classmethod
    def from_mean_photon_number(cls, n_mean: float, reference_frequency: float, gamma_se) -> "BathSpec":
        """Bath whose Bose occupation at ``reference_frequency`` equals ``n_mean``."""
        if n_mean < 0:
            raise DomainError("mean photon number must be >= 0")
        if reference_frequency <= 0:
            raise DomainError("reference frequency must be > 0")
        beta = math.inf if n_mean == 0 else math.log1p(1.0 / n_mean) / reference_frequency
        return cls(beta, gamma_se, reference_frequency)

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.inv_temperature)

    def gamma(self, edge: Edge) -> float:
        if not isinstance(self.gamma_se, Mapping):
            return float(self.gamma_se)
        if edge in self.gamma_se:
            return float(self.gamma_se[edge])
        rev = (edge[1], edge[0])
        if rev in self.gamma_se:
            return float(self.gamma_se[rev])
        raise KeyError(f"no spontaneous emission rate for edge {edge}")

    def mean_photon_number(self, omega: float) -> float:
        if omega <= 0:
            raise SingularRateError("occupation is defined for positive frequencies only")
        if self.zero_temperature:
            return 0.0
        x = self.inv_temperature * omega
        if x == 0:
            raise SingularRateError("infinite temperature gives a divergent occupation")
        if x > 700:
            return 0.0
        return 1.0 / math.expm1(x)


def thermal_rate(b: BathSpec, edge: Edge, omega: float, direction: str | None = None,
                 zero_tol: float = 1e-12) -> float:
    """gamma(omega): absorption for omega > 0, emission for omega < 0.

    ``direction`` ("emission" or "absorption") selects the branch at
    omega = 0, where the rate is evaluated at the bath's reference frequency.
    """
    g = b.gamma(edge)
    if abs(omega) <= zero_tol:
        if direction not in ("emission", "absorption"):
            raise SingularRateError(
                f"rate at zero frequency on edge {edge} is singular; pass direction= to use "
                "the dephasing convention"
            )
        if b.reference_frequency is None:
            raise SingularRateError("dephasing convention needs bath.reference_frequency")
        n = b.mean_photon_number(b.reference_frequency)
        return g * (n + 1.0) if direction == "emission" else g * n
    n = b.mean_photon_number(abs(omega))
    return g * n if omega > 0 else g * (n + 1.0)


@dataclass(frozen=True)
class MicroscopicModel:
    """Node Hamiltonians, coins and bath.

    ``omega[i - 1]`` is the internal Hamiltonian on node i used to build
    eigen-operators.  ``hamiltonians`` holds optional residual node terms
    (e.g. a weak drive) that only enter as commutators.
    """

    graph: WalkGraph
    omega: tuple[np.ndarray, ...]
    coins: Mapping[Edge, np.ndarray]
    bath: BathSpec
    hamiltonians: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        omega = tuple(as_cmatrix(o) for o in self.omega)
        if len(omega) != self.graph.node_count:
            raise DomainError(f"need {self.graph.node_count} node Hamiltonians, got {len(omega)}")
        dim = omega[0].shape[0]
        for k, o in enumerate(omega, start=1):
            if o.shape != (dim, dim):
                raise DomainError(f"node {k} Hamiltonian has shape {o.shape}")
            if not is_hermitian(o):
                raise DomainError(f"node {k} Hamiltonian is not Hermitian")
        coins = {}
        for (s, d), a in self.coins.items():
            a = as_cmatrix(a)
            if a.shape != (dim, dim):
                raise DomainError(f"coin {(s, d)} has shape {a.shape}")
            if (s, d) not in self.graph.edges or (d, s) not in self.graph.edges:
                raise DomainError(f"coin {(s, d)} needs edges in both directions")
            coins[(int(s), int(d))] = a
        for j, i in self.graph.edges:
            if (j, i) not in coins and (i, j) not in coins:
                raise DomainError(f"edge {(j, i)} has no coin")
        hams = {}
        for i, h in self.hamiltonians.items():
            h = as_cmatrix(h)
            if not is_hermitian(h):
                raise DomainError(f"residual Hamiltonian on node {i} is not Hermitian")
            hams[int(i)] = h
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "coins", coins)
        object.__setattr__(self, "hamiltonians", hams)

    @property
    def dim(self) -> int:
        return self.omega[0].shape[0]


@dataclass(frozen=True)
class EigenOperatorSet:
    """Per coin edge, the (frequency, A(frequency)) components, ascending in frequency."""

    components: Mapping[Edge, tuple[tuple[float, np.ndarray], ...]]

    def completeness_defect(self, coins: Mapping[Edge, np.ndarray]) -> float:
        """Max-norm of  sum_w A(w) - A  over all edges.

        Components with w < 0 play the role of the negative-frequency branch and
        those with w > 0 are the adjoint branch A^dagger(w') = A(-w'); their sum
        must give back the coin.
        """
        worst = 0.0
        for edge, comps in self.components.items():
            total = sum((op for _, op in comps), np.zeros_like(coins[edge]))
            worst = max(worst, max_norm(total - coins[edge]))
        return worst

    def frequencies(self, edge: Edge) -> list[float]:
        return [w for w, _ in self.components[edge]]


def _cluster(values: list[float], tol: float) -> list[list[int]]:
    order = sorted(range(len(values)), key=lambda k: values[k])
    groups: list[list[int]] = []
    for k in order:
        if groups and values[k] - values[groups[-1][-1]] < tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def eigen_decompose_coins(m: MicroscopicModel, degeneracy_tol: float | None = None,
                          frequency_tol: float | None = None) -> EigenOperatorSet:
    cache: dict[bytes, object] = {}

    def eig(h):
        key = h.tobytes()
        if key not in cache:
            cache[key] = hermitian_eigen(h, degeneracy_tol)
        return cache[key]

    comps = {}
    for (s, d), a in sorted(m.coins.items()):
        es, ed = eig(m.omega[s - 1]), eig(m.omega[d - 1])
        scale = max(1.0, max(abs(x) for x in es.levels + ed.levels))
        ftol = 1e-9 * scale if frequency_tol is None else frequency_tol
        pieces, freqs = [], []
        cut = 1e-14 * max(1.0, max_norm(a))
        for lam_d, p_d in zip(ed.levels, ed.projectors):
            for lam_s, p_s in zip(es.levels, es.projectors):
                piece = p_d @ a @ p_s
                if max_norm(piece) > cut:
                    pieces.append(piece)
                    freqs.append(lam_s - lam_d)
        out = []
        for group in _cluster(freqs, ftol):
            w = float(np.mean([freqs[k] for k in group]))
            if abs(w) < ftol:
                w = 0.0
            out.append((w, sum(pieces[k] for k in group)))
        comps[(s, d)] = tuple(out)
    return EigenOperatorSet(comps)


@dataclass(frozen=True)
class JumpTerm:
    """One dissipative channel: gain ``rate * op rho_src op^dagger`` at dst, matching loss at src."""

    src: int
    dst: int
    rate: float
    op: np.ndarray
    omega: float
    label: str = ""


@dataclass(frozen=True)
class GeneratorSpec:
    """Right-hand side data of the continuous-time walk d rho_i / dt = K_i(rho_1..rho_M)."""

    graph: WalkGraph
    dim: int
    jumps: tuple[JumpTerm, ...]
    hamiltonians: Mapping[int, np.ndarray] = field(default_factory=dict)

    @cached_property
    def _losses(self) -> dict[int, np.ndarray]:
        out = {i: np.zeros((self.dim, self.dim), dtype=complex) for i in self.graph.nodes}
        for t in self.jumps:
            out[t.src] = out[t.src] + t.rate * (t.op.conj().T @ t.op)
        return out

    def loss_operator(self, i: int) -> np.ndarray:
        return self._losses[i]

    def hamiltonian(self, i: int) -> np.ndarray:
        return self.hamiltonians.get(i, np.zeros((self.dim, self.dim), dtype=complex))

    def gains(self, i: int) -> list[JumpTerm]:
        return [t for t in self.jumps if t.dst == i]

    def losses(self, i: int) -> list[JumpTerm]:
        return [t for t in self.jumps if t.src == i]

    def max_loss_rate(self) -> float:
        """Max absolute row sum of the loss operators (spectral bound proxy)."""
        worst = 0.0
        for i in self.graph.nodes:
            worst = max(worst, float(np.abs(self.loss_operator(i)).sum(axis=1).max()))
        return worst

    def max_hamiltonian_norm(self) -> float:
        if not self.hamiltonians:
            return 0.0
        return max(float(np.abs(h).sum(axis=1).max()) for h in self.hamiltonians.values())


def build_generator(m: MicroscopicModel, eops: EigenOperatorSet, b: BathSpec | None = None,
                    include_hamiltonians: bool = True) -> GeneratorSpec:
    b = m.bath if b is None else b
    defect = eops.completeness_defect(m.coins)
    if defect > 1e-9:
        raise DomainError(f"eigen-operator completeness fails (defect {defect:.3e})")
    jumps = []
    for (s, d), comps in sorted(eops.components.items()):
        for w, a in comps:
            if w == 0.0:
                fwd = thermal_rate(b, (s, d), 0.0, direction="emission")
                bwd = thermal_rate(b, (s, d), 0.0, direction="absorption")
            else:
                fwd = thermal_rate(b, (s, d), -w)
                bwd = thermal_rate(b, (s, d), w)
            if fwd < 0 or bwd < 0:
                raise ArithmeticError("negative rate computed")
            jumps.append(JumpTerm(s, d, fwd, a, w, f"{s}->{d}@{w:+.6g}"))
            jumps.append(JumpTerm(d, s, bwd, a.conj().T, -w, f"{d}->{s}@{-w:+.6g}"))
    hams = dict(m.hamiltonians) if include_hamiltonians else {}
    return GeneratorSpec(m.graph, m.dim, tuple(jumps), hams)


def default_norm_tol(g: GeneratorSpec, delta: float) -> float:
    """O(delta^2) tolerance for the first-order loop operators."""
    scale = g.max_loss_rate() + g.max_hamiltonian_norm()
    return max(1e-10, 10.0 * delta**2 * max(scale, scale**2))


LOOP_FORMS = ("first_order", "exact")


def discretize(g: GeneratorSpec, delta: float, loop_form: str = "first_order",
               norm_tol: float | None = None) -> TransitionTable:
    """Finite-difference the generator into jump operators.

    Edge operators are ``sqrt(delta * rate) * A``.  The loop operator is

    * ``first_order``: I - (delta/2) K_i - i delta H_i, normalised up to O(delta^2);
    * ``exact``: exp(-i delta H_i) sqrt(I - sum_out B^dagger B), which agrees with
      the first-order form to O(delta^2) and makes the Kraus sum exactly I.
    """
    if not delta > 0:
        raise StepSizeError("delta must be > 0")
    if loop_form not in LOOP_FORMS:
        raise ValueError(f"loop_form must be one of {LOOP_FORMS}")
    eye = np.eye(g.dim, dtype=complex)
    edge_ops: dict[Edge, list[np.ndarray]] = {}
    out_sq = {i: np.zeros((g.dim, g.dim), dtype=complex) for i in g.graph.nodes}
    for t in sorted(g.jumps, key=lambda t: (t.src, t.dst, t.omega)):
        op = math.sqrt(delta * t.rate) * t.op
        edge_ops.setdefault((t.src, t.dst), []).append(op)
        out_sq[t.src] += op.conj().T @ op
    tol = default_norm_tol(g, delta) if norm_tol is None else norm_tol
    loops = {}
    # nodes with identical local data share one loop operator
    cache: dict[bytes, np.ndarray] = {}
    for i in g.graph.nodes:
        h = g.hamiltonian(i)
        key = h.tobytes() + g.loss_operator(i).tobytes() + out_sq[i].tobytes()
        if key in cache:
            loops[i] = cache[key]
            continue
        # total jump probability out of node i must stay below 1
        if spectral_norm(out_sq[i]) > 1.0 + 1e-12:
            raise StepSizeError(f"delta={delta} too large at node {i}: jump probabilities exceed 1")
        if loop_form == "first_order":
            loop = eye - 0.5 * delta * g.loss_operator(i) - 1j * delta * h
        else:
            remainder = eye - out_sq[i]
            remainder = 0.5 * (remainder + remainder.conj().T)
            try:
                root = psd_sqrt(remainder)
            except DomainError as exc:
                raise StepSizeError(f"delta={delta} too large at node {i}: {exc}") from None
            loop = (unitary_exp(h, delta) if max_norm(h) > 0 else eye) @ root
        norm = spectral_norm(loop)
        if norm > 1.0 + tol:
            raise StepSizeError(f"delta={delta}: loop operator at node {i} has norm {norm:.8f}")
        loops[i] = cache[key] = loop
    table = TransitionTable(g.dim, g.graph, {k: tuple(v) for k, v in edge_ops.items()}, loops,
                            meta={"delta": delta, "loop_form": loop_form})
    worst = max(normalization_defects(table).values())
    if worst > tol:
        raise StepSizeError(f"delta={delta}: normalization defect {worst:.3e} exceeds {tol:.3e}")
    table.meta["norm_tol"] = tol
    table.meta["max_defect"] = worst
    return table
