"""Ready-made models: the two-level walker on a circle and on a finite chain.

Each builder returns the microscopic model (input to the derivation
pipeline) together with the closed-form jump-operator table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .discrete import TransitionTable, WalkState
from .graph import make_chain, make_circle
from .linalg import I2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, DomainError, pauli_vector
from .microscopic import BathSpec, MicroscopicModel, build_generator, discretize, eigen_decompose_coins

# |-> = (|1> - |0>)/sqrt(2) in the (|0>, |1>) basis
MINUS_STATE = np.array([-1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


INITIAL_STATES = {
    "half_identity": 0.5 * I2,
    "minus": projector(MINUS_STATE),
    "plus": projector([1 / math.sqrt(2), 1 / math.sqrt(2)]),
    "ground": projector([1, 0]),
    "excited": projector([0, 1]),
}


@dataclass(frozen=True)
class CircleExampleParams:
    M: int = 101
    omega0: float = 10.0
    lambda_field: float = 0.3
    # the drive must have a component transverse to sigma_z; y matches the
    # collective-variable equations used by observables.appendix_oracle
    field_dir: tuple[float, float, float] = (0.0, 1.0, 0.0)
    gamma_se: float = 0.1
    n_mean: float = 1.0
    delta: float = 0.05
    start_node: int = 51
    initial: str = "half_identity"
    loop_form: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "field_dir", tuple(float(x) for x in self.field_dir))
        if abs(math.sqrt(sum(x * x for x in self.field_dir)) - 1.0) > 1e-12:
            raise DomainError("field_dir must be a unit vector")
        for name in ("omega0", "lambda_field", "gamma_se", "n_mean", "delta"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.gamma_se <= 0 or self.delta <= 0:
            raise DomainError("gamma_se and delta must be > 0")
        if not 1 <= self.start_node <= self.M:
            raise DomainError("start_node outside 1..M")


@dataclass(frozen=True)
class ChainExampleParams:
    M: int = 101
    eps0: float = 1.0
    delta0: float = 0.5
    alpha: float = 1.0
    beta_deph: float = 0.0
    gamma_se: float = 0.1
    n_mean: float = 1.0
    delta: float = 0.05
    start_node: int = 51
    initial: str = "minus"
    loop_form: str = "exact"
    # True reproduces the boundary loop operators exactly as printed
    # (B_1^1 with n+1, B_M^M with n), which are not trace preserving
    printed_boundaries: bool = False

    def __post_init__(self):
        if self.delta0 <= 0:
            raise DomainError("delta0 must be > 0")
        if self.alpha == 0 and self.beta_deph == 0:
            raise DomainError("alpha and beta_deph cannot both vanish")
        if self.gamma_se <= 0 or self.delta <= 0 or self.n_mean < 0:
            raise DomainError("gamma_se, delta must be > 0 and n_mean >= 0")
        if not 1 <= self.start_node <= self.M:
            raise DomainError("start_node outside 1..M")


def circle_model(p: CircleExampleParams) -> MicroscopicModel:
    g = make_circle(p.M)
    omega = tuple(0.5 * p.omega0 * SIGMA_Z for _ in range(p.M))
    coins = {(i, i % p.M + 1): SIGMA_MINUS for i in range(1, p.M + 1)}
    bath = BathSpec.from_mean_photon_number(p.n_mean, p.omega0, p.gamma_se)
    drive = p.lambda_field * pauli_vector(p.field_dir)
    return MicroscopicModel(g, omega, coins, bath, {i: drive for i in g.nodes})


def circle_table(p: CircleExampleParams, loop_form: str | None = None) -> TransitionTable:
    """Closed-form A (loop), B (move right) and C (move left) operators."""
    loop_form = p.loop_form if loop_form is None else loop_form
    d, g, n = p.delta, p.gamma_se, p.n_mean
    b = math.sqrt(d * g * (n + 1)) * SIGMA_MINUS
    c = math.sqrt(d * g * n) * SIGMA_PLUS
    ns = pauli_vector(p.field_dir)
    if loop_form == "first_order":
        a = I2 - 0.5 * d * (g * (n + 1) * SIGMA_PLUS @ SIGMA_MINUS + g * n * SIGMA_MINUS @ SIGMA_PLUS) \
            - 1j * p.lambda_field * d * ns
    elif loop_form == "exact":
        rot = math.cos(p.lambda_field * d) * I2 - 1j * math.sin(p.lambda_field * d) * ns
        a = rot @ np.diag([math.sqrt(1 - d * g * n), math.sqrt(1 - d * g * (n + 1))]).astype(complex)
    else:
        raise ValueError(f"unknown loop_form {loop_form!r}")
    graph = make_circle(p.M)
    edge_ops: dict = {}
    for i in graph.nodes:
        right = i % p.M + 1
        edge_ops.setdefault((i, right), []).append(b)
        edge_ops.setdefault((right, i), []).append(c)
    loops = {i: a for i in graph.nodes}
    return TransitionTable(2, graph, {k: tuple(v) for k, v in edge_ops.items()}, loops,
                           meta={"delta": d, "loop_form": loop_form})


def dephasing_operator(p: ChainExampleParams) -> np.ndarray:
    return p.alpha * SIGMA_Z + p.beta_deph * I2


def chain_model(p: ChainExampleParams) -> MicroscopicModel:
    """Chain with S = alpha sigma_z + beta I coupling neighbouring nodes.

    All nodes carry the same internal Hamiltonian, so every eigen-component
    of S sits at zero frequency; the ladder spacing delta0 enters as the
    bath's reference frequency, and moving left (i+1 -> i) is the emitting
    direction.
    """
    g = make_chain(p.M)
    omega = tuple(0.5 * p.eps0 * SIGMA_Z for _ in range(p.M))
    s = dephasing_operator(p)
    coins = {(i + 1, i): s for i in range(1, p.M)}
    bath = BathSpec.from_mean_photon_number(p.n_mean, p.delta0, p.gamma_se)
    return MicroscopicModel(g, omega, coins, bath)


def chain_table(p: ChainExampleParams, loop_form: str | None = None,
                printed_boundaries: bool | None = None) -> TransitionTable:
    loop_form = p.loop_form if loop_form is None else loop_form
    printed = p.printed_boundaries if printed_boundaries is None else printed_boundaries
    d, g, n = p.delta, p.gamma_se, p.n_mean
    s = dephasing_operator(p)
    s2 = s @ s
    left = math.sqrt(g * (n + 1) * d) * s
    right = math.sqrt(g * n * d) * s
    rate_1, rate_m = (g * (n + 1), g * n) if printed else (g * n, g * (n + 1))

    def loop(rate):
        if loop_form == "first_order":
            return I2 - 0.5 * rate * d * s2
        if loop_form == "exact":
            return np.diag(np.sqrt(1 - rate * d * np.diag(s2).real)).astype(complex)
        raise ValueError(f"unknown loop_form {loop_form!r}")

    graph = make_chain(p.M)
    edge_ops = {}
    for i in range(1, p.M):
        edge_ops[(i + 1, i)] = (left,)
        edge_ops[(i, i + 1)] = (right,)
    loops = {j: loop(g * (2 * n + 1)) for j in graph.nodes}
    loops[1] = loop(rate_1)
    loops[p.M] = loop(rate_m)
    return TransitionTable(2, graph, edge_ops, loops, meta={"delta": d, "loop_form": loop_form})


def derived_table(model: MicroscopicModel, delta: float, loop_form: str = "first_order") -> TransitionTable:
    eops = eigen_decompose_coins(model)
    return discretize(build_generator(model, eops), delta, loop_form)


def build_circle_model(p: CircleExampleParams) -> tuple[MicroscopicModel, TransitionTable]:
    return circle_model(p), circle_table(p)


def build_chain_model(p: ChainExampleParams) -> tuple[MicroscopicModel, TransitionTable]:
    return chain_model(p), chain_table(p)


def initial_state(p: CircleExampleParams | ChainExampleParams) -> WalkState:
    if p.initial not in INITIAL_STATES:
        raise DomainError(f"unknown initial state {p.initial!r}")
    return WalkState.localized(p.M, p.start_node, INITIAL_STATES[p.initial])


@dataclass(frozen=True)
class Preset:
    name: str
    params_type: type
    model: object
    table: object


PRESETS = {
    "circle-example": Preset("circle-example", CircleExampleParams, circle_model, circle_table),
    "chain-example": Preset("chain-example", ChainExampleParams, chain_model, chain_table),
}


def make_params(preset: str, overrides: dict | None = None):
    """Instantiate a preset's parameters, rejecting unknown keys."""
    if preset not in PRESETS:
        raise KeyError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cls = PRESETS[preset].params_type
    names = {f.name for f in fields(cls)}
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - names)
    if unknown:
        raise KeyError(f"unknown parameter(s) for {preset}: {', '.join(unknown)}")
    if "field_dir" in overrides:
        overrides["field_dir"] = tuple(overrides["field_dir"])
    return cls(**overrides)


def params_dict(p) -> dict:
    out = {}
    for f in fields(p):
        v = getattr(p, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


__all__ = [
    "CircleExampleParams",
    "ChainExampleParams",
    "build_circle_model",
    "build_chain_model",
    "circle_model",
    "circle_table",
    "chain_model",
    "chain_table",
    "derived_table",
    "initial_state",
    "make_params",
    "params_dict",
    "PRESETS",
    "INITIAL_STATES",
]
