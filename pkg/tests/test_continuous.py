import numpy as np
import pytest
from hypothesis import given, strategies as st

from oqw.continuous import IntegratorConfig, integrate, rhs
from oqw.discrete import WalkState, run, step
from oqw.graph import make_custom
from oqw.linalg import I2, SIGMA_Z, ShapeError
from oqw.microscopic import (BathSpec, MicroscopicModel, StepSizeError, build_generator, discretize,
                             eigen_decompose_coins)
from oqw.presets import ChainExampleParams, CircleExampleParams, chain_model, circle_model, initial_state
from conftest import random_density


def generator(model):
    return build_generator(model, eigen_decompose_coins(model))


@pytest.fixture(scope="module")
def circle_gen():
    return generator(circle_model(CircleExampleParams(M=21, start_node=11, n_mean=1)))


def test_zero_generator():
    g = make_custom(3, [])
    gen = generator(MicroscopicModel(g, (SIGMA_Z,) * 3, {}, BathSpec(1.0, 0.1)))
    s = WalkState.localized(3, 2, I2 / 2)
    assert np.array_equal(rhs(gen, s), np.zeros((3, 2, 2)))


def test_circle_excited_zero_temperature():
    p = CircleExampleParams(M=11, start_node=5, n_mean=0)
    gen = generator(circle_model(p))
    excited = np.diag([0, 1]).astype(complex)
    d = rhs(gen, WalkState.localized(11, 5, excited))
    g = p.gamma_se
    assert np.allclose(d[5], g * np.diag([1, 0]), atol=1e-15)
    h = gen.hamiltonian(5)
    assert np.allclose(d[4], -g * excited - 1j * (h @ excited - excited @ h), atol=1e-15)
    assert np.abs(np.delete(d, [4, 5], axis=0)).max() == 0


def test_chain_diagonal_rhs_is_poisson_recursion():
    p = ChainExampleParams(M=9, start_node=5, n_mean=0)
    gen = generator(chain_model(p))
    rng = np.random.default_rng(2)
    blocks = np.zeros((9, 2, 2), dtype=complex)
    for i in range(9):
        blocks[i] = np.diag(rng.random(2))
    blocks /= np.einsum("mii->", blocks).real
    d = rhs(gen, WalkState(blocks))
    P = np.einsum("mii->m", blocks).real
    dP = np.einsum("mii->m", d).real
    expect = p.gamma_se * (np.append(P[1:], 0) - P)
    expect[0] = p.gamma_se * P[1]
    assert np.allclose(dP, expect, atol=1e-15)


@given(st.integers(0, 2**31 - 1))
def test_rhs_trace_and_hermiticity(seed):
    rng = np.random.default_rng(seed)
    gen = generator(circle_model(CircleExampleParams(M=21, start_node=11, n_mean=1)))
    w = rng.random(21)
    w /= w.sum()
    blocks = np.array([w[i] * random_density(rng, 2) for i in range(21)])
    d = rhs(gen, WalkState(blocks))
    assert abs(np.einsum("mii->", d)) < 1e-11
    assert np.abs(d - np.conj(np.swapaxes(d, 1, 2))).max() < 1e-12


def test_shape_errors(circle_gen):
    with pytest.raises(ShapeError):
        rhs(circle_gen, WalkState.localized(20, 1, I2 / 2))


def test_integrate_zero_time_and_config(circle_gen):
    s0 = WalkState.localized(21, 11, I2 / 2)
    assert integrate(circle_gen, s0, IntegratorConfig(0.1, 0.0)) == [s0]
    with pytest.raises(ValueError):
        IntegratorConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(0.1, 1.0, scheme="leapfrog")
    with pytest.raises(StepSizeError):
        integrate(circle_gen, s0, IntegratorConfig(1.0, 1.0, "euler"))
    with pytest.raises(StepSizeError):
        integrate(circle_gen, s0, IntegratorConfig(3.0, 3.0, "rk4"))


def test_integrate_conserves_trace(circle_gen):
    s0 = WalkState.localized(21, 11, I2 / 2)
    snaps = integrate(circle_gen, s0, IntegratorConfig(0.05, 20.0, "rk4", 100))
    assert [s.step for s in snaps] == [0, 100, 200, 300, 400]
    assert np.isclose(snaps[-1].time, 20.0)
    assert all(abs(s.total_trace() - 1) < 1e-8 for s in snaps)
    assert min(s.min_eigenvalue() for s in snaps) > -1e-9


def test_euler_step_matches_discrete_step_to_second_order(circle_gen):
    s0 = WalkState.localized(21, 11, I2 / 2)
    gaps = []
    for delta in (0.02, 0.01):
        t = discretize(circle_gen, delta, "first_order")
        e = integrate(circle_gen, s0, IntegratorConfig(delta, delta, "euler"))[-1]
        gaps.append(np.abs(step(t, s0).blocks - e.blocks).max())
    assert 3.2 < gaps[0] / gaps[1] < 4.8


def test_rk4_matches_discrete_walk():
    p = CircleExampleParams(M=41, start_node=21, n_mean=1)
    gen = generator(circle_model(p))
    s0 = initial_state(p)
    disc = run(discretize(gen, p.delta, "exact"), s0, 1000, 1000)[-1]
    cont = integrate(gen, s0, IntegratorConfig(p.delta, 1000 * p.delta, "rk4", 1000))[-1]
    assert np.abs(disc.occupations() - cont.occupations()).max() < 5e-3
