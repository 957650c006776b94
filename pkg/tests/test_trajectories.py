import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oqw.discrete import TransitionTable, run
from oqw.graph import make_custom
from oqw.linalg import I2
from oqw.observables import total_variation
from oqw.presets import (INITIAL_STATES, ChainExampleParams, CircleExampleParams, chain_table, circle_table,
                         initial_state)
from oqw.trajectories import (DegenerateDistributionError, direction_frequencies, run_ensemble, run_trajectory,
                              step_directions, unravel_step)


def test_identity_table_stays():
    g = make_custom(3, [])
    t = TransitionTable(2, g, {}, {i: I2 for i in g.nodes})
    rho = np.diag([0.25, 0.75]).astype(complex)
    node, new, label, p = unravel_step(t, 2, rho, 0.99)
    assert node == 2 and label == "2->2"
    assert np.allclose(new, rho) and np.allclose(p, [1.0])


def test_zero_temperature_excited_jumps_right():
    p = CircleExampleParams(n_mean=0)
    t = circle_table(p)
    excited = np.diag([0, 1]).astype(complex)
    _, _, _, probs = unravel_step(t, 10, excited, 0.0)
    labels = [o[2] for o in t.outcomes(10)]
    right = probs[labels.index("10->11")]
    assert math.isclose(right, p.delta * p.gamma_se, rel_tol=1e-12)
    assert probs[labels.index("10->9")] == 0
    node, new, label, _ = unravel_step(t, 10, excited, 1 - 1e-12)
    assert node == 11 and label == "10->11"
    assert np.allclose(new, np.diag([1, 0]))


def test_branch_probabilities_direct_trace():
    p = CircleExampleParams(n_mean=5)
    t = circle_table(p)
    rho = I2 / 2
    _, _, _, probs = unravel_step(t, 10, rho, 0.5)
    for (_, op, _), pk in zip(t.outcomes(10), probs):
        assert math.isclose(pk, np.trace(op @ rho @ op.conj().T).real, rel_tol=1e-14)
    labels = [o[2] for o in t.outcomes(10)]
    assert math.isclose(probs[labels.index("10->11")], p.delta * p.gamma_se * 6 / 2)
    assert math.isclose(probs[labels.index("10->9")], p.delta * p.gamma_se * 5 / 2)
    assert math.isclose(sum(probs), 1.0, rel_tol=1e-12)


def test_degenerate_distribution():
    g = make_custom(2, [])
    t = TransitionTable(2, g, {}, {1: np.zeros((2, 2)), 2: I2})
    with pytest.raises(DegenerateDistributionError):
        unravel_step(t, 1, I2 / 2, 0.3)
    with pytest.raises(DegenerateDistributionError):
        run_trajectory(t, 1, I2 / 2, 3, 0)


def test_trajectory_record_invariants():
    t = circle_table(CircleExampleParams(n_mean=1))
    r = run_trajectory(t, 51, I2 / 2, 400, 11)
    r.check(t)
    assert len(r) == 401 and r.labels[0] == ""
    for a, b, lab in zip(r.nodes[:-1], r.nodes[1:], r.labels[1:]):
        assert lab == f"{a}->{b}"
    empty = run_trajectory(t, 51, I2 / 2, 0, 11)
    assert len(empty) == 1 and empty.nodes[0] == 51


def test_seed_determinism():
    t = circle_table(CircleExampleParams(n_mean=1))
    a = run_trajectory(t, 51, I2 / 2, 300, 5)
    b = run_trajectory(t, 51, I2 / 2, 300, 5)
    c = run_trajectory(t, 51, I2 / 2, 300, 6)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.states, b.states) and a.labels == b.labels
    assert a.states.tobytes() == b.states.tobytes()
    assert not np.array_equal(a.nodes, c.nodes)


def test_ensemble_matches_individual_trajectories():
    t = circle_table(CircleExampleParams(n_mean=1))
    e = run_ensemble(t, 51, I2 / 2, 200, 5, 100, record_every=50, keep_paths=True, threads=2)
    for k in range(5):
        assert np.array_equal(e.paths[k], run_trajectory(t, 51, I2 / 2, 200, 100 + k).nodes)
    assert (e.counts.sum(axis=1) == 5).all()
    single = run_ensemble(t, 51, I2 / 2, 200, 1, 100, record_every=50, keep_paths=True)
    assert np.array_equal(single.counts[-1], np.bincount([single.paths[0, -1] - 1], minlength=101))


@given(st.integers(0, 2**20))
def test_pure_states_stay_pure(seed):
    p = ChainExampleParams(n_mean=1)
    r = run_trajectory(chain_table(p), 51, INITIAL_STATES["minus"], 60, seed)
    purity = np.einsum("kij,kji->k", r.states, r.states).real
    assert np.abs(purity - 1).max() < 1e-10


def test_ballistic_at_zero_temperature():
    circ = run_ensemble(circle_table(CircleExampleParams(n_mean=0)), 51, I2 / 2, 2000, 20, 0, keep_paths=True)
    assert (step_directions(circ.paths, 101) >= 0).all()
    chain = run_ensemble(chain_table(ChainExampleParams(n_mean=0)), 51, INITIAL_STATES["minus"], 2000, 20, 0,
                         keep_paths=True)
    assert (np.diff(chain.paths, axis=1) <= 0).all()


def test_ensemble_unbiased_small():
    p = CircleExampleParams(M=41, start_node=21, n_mean=1)
    t = circle_table(p)
    e = run_ensemble(t, 21, I2 / 2, 300, 3000, 0, record_every=300)
    occ = run(t, initial_state(p), 300, 300)[-1].occupations()
    assert total_variation(e.distribution(-1), occ) < 0.06
    mu = occ @ np.arange(1, 42)
    var = occ @ np.arange(1, 42) ** 2 - mu ** 2
    assert abs(e.mean[-1] - mu) < 3 * math.sqrt(var / 3000)


def test_direction_frequencies():
    paths = np.array([[5, 6, 6, 5, 4]])
    f = direction_frequencies(paths)
    assert f == {"right": 1 / 3, "left": 2 / 3, "moves": 3}
    assert step_directions(np.array([[101, 1, 101]]), 101).tolist() == [[1, -1]]
