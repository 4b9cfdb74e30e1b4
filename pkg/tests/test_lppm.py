import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from priste.events import GridMap
from priste.lppm import (PlanarLaplace, PosteriorState, calibrated_rate, compute_delta_set,
                         geo_indistinguishability_violation, plm_emission_matrix, posterior_update,
                         restricted_plm_emission, sample_row, uniform_emission_matrix)
from priste.markov import InconsistentObservationError


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 3.0])
def test_plm_is_geo_indistinguishable(alpha):
    grid = GridMap(5, 5, 1.0)
    E = plm_emission_matrix(alpha, grid)
    assert np.allclose(E.sum(axis=1), 1.0)
    assert geo_indistinguishability_violation(E, alpha, grid) <= 1 + 1e-12


def test_rate_is_full_on_symmetric_map():
    grid = GridMap(2, 1, 1.0)
    assert calibrated_rate(0.7, grid) == 0.7
    E = plm_emission_matrix(0.7, grid)
    assert E[0, 0] / E[1, 0] == pytest.approx(np.exp(0.7))


def test_rate_bounds():
    grid = GridMap(6, 4, 0.5)
    k = calibrated_rate(1.0, grid)
    assert 0.5 <= k <= 1.0


def test_plm_concentrates_with_alpha():
    grid = GridMap(4, 4, 1.0)
    lo, hi = plm_emission_matrix(0.1, grid), plm_emission_matrix(2.0, grid)
    assert np.all(np.diag(hi) > np.diag(lo))
    with pytest.raises(ValueError):
        plm_emission_matrix(0.0, grid)


def test_planar_laplace_sampling_frequencies():
    grid = GridMap(3, 3, 1.0)
    mech = PlanarLaplace(1.0, grid)
    rng = np.random.default_rng(0)
    draws = np.array([mech.sample(4, rng) for _ in range(20000)])
    freq = np.bincount(draws, minlength=9) / draws.size
    assert np.allclose(freq, mech.emission[4], atol=0.015)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10), st.floats(0.0, 0.999999))
def test_sample_row_lands_in_support(weights, u):
    row = np.array(weights)
    if row.sum() == 0:
        return
    j = sample_row(row, u)
    assert 0 <= j < row.size and row[j] > 0


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.95))
def test_delta_set_is_minimal(seed, delta):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 30))
    p = rng.dirichlet(np.ones(m) * rng.choice([0.1, 1.0]))
    s = compute_delta_set(p, delta)
    mass = p[s.active].sum()
    assert mass >= 1 - delta - 1e-12
    # no smaller set reaches the mass: the top (k-1) cells fall short
    k = s.size
    if k > 1:
        top = np.sort(p)[::-1][: k - 1].sum()
        assert top < 1 - delta - 1e-12 or delta == 0
    # chosen cells dominate the excluded ones
    if 0 < k < m:
        assert p[s.active].min() >= p[~s.active].max()


def test_delta_zero_keeps_support():
    p = np.array([0.5, 0.0, 0.5, 0.0])
    assert compute_delta_set(p, 0.0).cells == [0, 2]
    with pytest.raises(ValueError):
        compute_delta_set(p, 1.0)


def test_restricted_emission_rows():
    grid = GridMap(3, 3, 1.0)
    s = compute_delta_set(np.arange(9, dtype=float) / 36, 0.3)
    E = restricted_plm_emission(0.5, grid, s)
    assert np.allclose(E.sum(axis=1), 1.0)
    assert np.all(E[:, ~s.active] == 0)
    U = restricted_plm_emission(0.0, grid, s)
    assert np.allclose(U[:, s.active], 1.0 / s.size)


def test_posterior_update_and_state():
    M = np.array([[0.9, 0.1], [0.2, 0.8]])
    st_ = PosteriorState(M, np.array([0.5, 0.5]))
    pm = st_.predict()
    assert pm == pytest.approx([0.55, 0.45])
    post = st_.update(np.array([0.9, 0.1]))
    assert post == pytest.approx(np.array([0.495, 0.045]) / 0.54)
    with pytest.raises(InconsistentObservationError):
        posterior_update([1.0, 0.0], [0.0, 1.0])


def test_uniform_emission():
    U = uniform_emission_matrix(4)
    assert np.allclose(U, 0.25)
