import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from priste import oracle
from priste.events import Event
from priste.markov import (DegenerateEventError, complement_joint_probability, InconsistentObservationError, RATIO_CAP,
                           forward_backward_posterior, joint_probability, leakage_ratio, lift_transition,
                           load_transition_csv, observation_likelihood, prior_probability,
                           save_transition_csv, validate_transition)

from conftest import EXAMPLE_EVENT, EXAMPLE_M, EXAMPLE_PRIOR_VECTOR, random_instance

SPLIT = np.array([[0, 0, 0.7, 0.1, 0.2, 0],
                  [0, 0, 0.5, 0.4, 0.1, 0],
                  [0, 0, 0.9, 0, 0.1, 0],
                  [0, 0, 0, 0.1, 0.2, 0.7],
                  [0, 0, 0, 0.4, 0.1, 0.5],
                  [0, 0, 0, 0, 0.1, 0.9]])
PLAIN = np.array([[0.1, 0.2, 0.7, 0, 0, 0],
                  [0.4, 0.1, 0.5, 0, 0, 0],
                  [0, 0.1, 0.9, 0, 0, 0],
                  [0, 0, 0, 0.1, 0.2, 0.7],
                  [0, 0, 0, 0.4, 0.1, 0.5],
                  [0, 0, 0, 0, 0.1, 0.9]])


def test_lifted_matrices_worked_example():
    for t, want in [(1, PLAIN), (2, SPLIT), (3, SPLIT), (4, PLAIN), (5, PLAIN)]:
        assert np.array_equal(lift_transition(EXAMPLE_M, EXAMPLE_EVENT, t), want), t


def test_prior_worked_example():
    for k in range(3):
        pi = np.eye(3)[k]
        assert prior_probability(pi, EXAMPLE_EVENT, EXAMPLE_M) == pytest.approx(EXAMPLE_PRIOR_VECTOR[k], abs=1e-12)


def test_validate_transition_rejects_bad_rows():
    with pytest.raises(ValueError):
        validate_transition([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(ValueError):
        validate_transition([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(ValueError):
        validate_transition(np.ones((2, 3)) / 3)


def test_transition_csv_roundtrip(tmp_path):
    p = tmp_path / "M.csv"
    save_transition_csv(EXAMPLE_M, p)
    assert np.array_equal(load_transition_csv(p), EXAMPLE_M)


@given(st.integers(0, 2**31 - 1))
def test_prior_matches_enumeration(seed):
    pi, M, ev, _ = random_instance(np.random.default_rng(seed), m_max=4, t_max=7)
    assert prior_probability(pi, ev, M) == pytest.approx(oracle.naive_prior(pi, M, ev), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_joint_matches_enumeration(seed):
    pi, M, ev, cols = random_instance(np.random.default_rng(seed))
    assert joint_probability(pi, ev, M, cols) == pytest.approx(oracle.naive_joint(pi, M, ev, cols), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_event_and_complement_sum_to_likelihood(seed):
    pi, M, ev, cols = random_instance(np.random.default_rng(seed))
    total = observation_likelihood(pi, M, cols)
    trajs = oracle.enumerate_trajectories(M.shape[0], max(cols.shape[0], ev.end))
    p = oracle.trajectory_probabilities(pi, M, trajs)
    for t in range(cols.shape[0]):
        p = p * cols[t][trajs[:, t]]
    not_joint = float(p[~oracle.event_indicator(ev, trajs)].sum())
    assert complement_joint_probability(pi, ev, M, cols) == pytest.approx(not_joint, abs=1e-12)
    assert joint_probability(pi, ev, M, cols) + not_joint == pytest.approx(total, rel=1e-9)


def test_time_varying_transition(rng):
    m, T = 3, 5
    Ms = rng.dirichlet(np.ones(m), size=(T, m))
    pi = rng.dirichlet(np.ones(m))
    ev = Event.from_cells("pattern", [[0, 1], [2]], [2, 3], m)
    cols = rng.random((T, m))
    assert prior_probability(pi, ev, Ms) == pytest.approx(oracle.naive_prior(pi, Ms, ev), abs=1e-14)
    assert joint_probability(pi, ev, Ms, cols) == pytest.approx(oracle.naive_joint(pi, Ms, ev, cols), abs=1e-14)


def test_long_horizon_does_not_underflow(rng):
    m, T = 5, 3000
    M = rng.dirichlet(np.ones(m), size=m)
    pi = np.full(m, 1 / m)
    ev = Event.from_cells("presence", [[0, 1]] * 3, [10, 11, 12], m)
    cols = rng.uniform(0.01, 0.2, size=(T, m))
    r = leakage_ratio(pi, ev, M, cols)
    assert np.isfinite(r) and 1 <= r < RATIO_CAP


@given(st.integers(0, 2**31 - 1))
def test_posterior_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    pi, M, _, cols = random_instance(rng, m_max=4, t_max=6)
    post = forward_backward_posterior(pi, M, cols)
    assert np.allclose(post, oracle.naive_posterior(pi, M, cols), atol=1e-12)
    assert np.allclose(post.sum(axis=0), 1.0)


def test_posterior_inconsistent_observation():
    M = np.eye(2)
    cols = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InconsistentObservationError):
        forward_backward_posterior([0.5, 0.5], M, cols)


def test_uninformative_observations_give_unit_ratio(rng):
    m = 4
    M = rng.dirichlet(np.ones(m), size=m)
    ev = Event.from_cells("presence", [[0]] * 2, [2, 3], m)
    cols = np.full((6, m), 0.25)
    assert leakage_ratio(np.full(m, 0.25), ev, M, cols) == pytest.approx(1.0, abs=1e-12)


def test_degenerate_event_raises():
    M = np.eye(2)
    ev = Event.from_cells("presence", [[0]], [2], 2)
    with pytest.raises(DegenerateEventError):
        leakage_ratio([1.0, 0.0], ev, M, np.ones((2, 2)))


def test_ratio_matches_oracle(rng):
    for _ in range(50):
        pi, M, ev, cols = random_instance(rng)
        prior = prior_probability(pi, ev, M)
        if not 1e-6 < prior < 1 - 1e-6:
            continue
        r = oracle.naive_ratio(pi, M, ev, cols)
        assert leakage_ratio(pi, ev, M, cols) == pytest.approx(max(r, 1 / r), rel=1e-9)
