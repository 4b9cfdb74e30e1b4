import numpy as np
import pytest

from priste import oracle
from priste.checker import Decision
from priste.events import Event, GridMap
from priste.lppm import plm_emission_matrix
from priste.runtime import (DELTALOC, GEOIND, PrivacySession, SessionConfig, calibrate_on_history, isclose_alpha, read_run_log,
                            read_summary, release_deltaloc, release_geoind, replay_trace, run_session,
                            summarize, window_mean, write_run_log, write_summary)
from priste.simkit import gaussian_transition, generate_trajectory

GRID = GridMap(4, 4, 1.0)
M = gaussian_transition(GRID, 1.5)
EVENTS = [Event.from_cells("presence", [[0, 1, 4, 5]] * 3, [3, 4, 5], GRID.m, name="corner")]


def _traj(seed=0, T=10):
    return generate_trajectory(M, np.full(GRID.m, 1 / GRID.m), T, seed=seed)


@pytest.mark.parametrize("algorithm", [GEOIND, DELTALOC])
def test_session_trace_replays_clean(algorithm):
    cfg = SessionConfig(epsilon=0.3, initial_alpha=2.0)
    res = run_session(cfg, _traj(), M, EVENTS, GRID, algorithm, delta=0.2, seed=5)
    assert len(res.records) == 10 and len(res.columns) == 10
    assert replay_trace(M, EVENTS, res.columns, 0.3)
    assert replay_trace(M, EVENTS, res.columns, 0.3, literal=True)
    for rec in res.records:
        assert isclose_alpha(rec, cfg)
        assert rec.decision_path[-1] is Decision.HOLDS
        assert all(d is not Decision.HOLDS for d in rec.decision_path[:-1])
        assert len(rec.decision_path) == rec.attempts


def test_released_cells_match_committed_columns():
    cfg = SessionConfig(epsilon=0.3, initial_alpha=2.0)
    s = PrivacySession(cfg, M, EVENTS, GRID, seed=1)
    for cell in _traj(1):
        rec = release_geoind(s, cell)
        E = np.full((16, 16), 1 / 16) if rec.uniform else plm_emission_matrix(rec.final_alpha, GRID)
        assert np.array_equal(s.columns[-1], E[:, rec.released_cell])
        assert s.released[-1] == rec.released_cell
    assert s.clock == 10


def test_same_seed_same_trace():
    cfg = SessionConfig(epsilon=0.5, initial_alpha=1.0)
    a = run_session(cfg, _traj(), M, EVENTS, GRID, seed=11)
    b = run_session(cfg, _traj(), M, EVENTS, GRID, seed=11)
    assert [r.released_cell for r in a.records] == [r.released_cell for r in b.records]
    assert np.array_equal(a.final_alpha, b.final_alpha)


def test_tight_epsilon_forces_budget_down():
    loose = run_session(SessionConfig(5.0, 2.0), _traj(), M, EVENTS, GRID, seed=2)
    tight = run_session(SessionConfig(0.05, 2.0), _traj(), M, EVENTS, GRID, seed=2)
    assert tight.final_alpha.mean() < loose.final_alpha.mean()
    assert np.all(tight.final_alpha <= loose.final_alpha + 1e-12)


def test_no_events_commits_first_draw():
    res = run_session(SessionConfig(0.1, 1.0), _traj(), M, [], GRID, seed=0)
    assert all(r.attempts == 1 and r.final_alpha == 1.0 for r in res.records)


def test_degenerate_event_dropped(caplog):
    ident = np.eye(GRID.m)
    ev = Event.from_cells("pattern", [[0], [1]], [1, 2], GRID.m, name="never")
    s = PrivacySession(SessionConfig(0.5, 1.0), ident, [ev], GRID, seed=0)
    assert s.dropped == [ev] and s.states == []
    assert "never" in caplog.text


def test_uniform_fallback():
    cfg = SessionConfig(epsilon=1e-6, initial_alpha=1.0, alpha_floor=0.2)
    s = PrivacySession(cfg, M, EVENTS, GRID, seed=0)
    recs = [release_geoind(s, c) for c in _traj(3)]
    assert any(r.uniform and r.final_alpha == 0.0 for r in recs)
    assert all(isclose_alpha(r, cfg) for r in recs)


def test_deltaloc_posterior_matches_enumeration():
    grid = GridMap(2, 2, 1.0)
    Mg = gaussian_transition(grid, 1.0)
    ev = Event.from_cells("presence", [[0]], [2], 4)
    s = PrivacySession(SessionConfig(1.0, 1.0), Mg, [ev], grid, seed=3)
    pi = s.pi.copy()
    for k, c in enumerate([0, 1, 3, 2, 0, 0]):
        release_deltaloc(s, c, 0.2)
        ref = oracle.naive_posterior(pi @ Mg, Mg, np.array(s.columns))[:, -1]
        assert np.allclose(s.posterior.p_plus, ref, atol=1e-12)


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        run_session(SessionConfig(1.0, 1.0), [0], M, EVENTS, GRID, "other")


def test_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(1.0, 1.0, decay=1.0)
    with pytest.raises(ValueError):
        SessionConfig(1.0, 0.0)
    assert SessionConfig(1.0, 0.5).alpha_floor == 0.5 * 2**-20


def test_summary_is_order_independent(tmp_path):
    cfg = SessionConfig(0.5, 1.0)
    rs = [run_session(cfg, _traj(k), M, EVENTS, GRID, seed=k) for k in range(4)]
    a, b = summarize(rs), summarize(rs[::-1])
    assert np.array_equal(a.mean_alpha, b.mean_alpha) and np.array_equal(a.sd_dist, b.sd_dist)
    assert a.sd_alpha == pytest.approx(np.array([r.final_alpha for r in rs]).std(0, ddof=1))
    p = tmp_path / "summary.csv"
    write_summary(p, a)
    back = read_summary(p)
    assert np.array_equal(back.mean_alpha, a.mean_alpha)
    q = tmp_path / "run.csv"
    write_run_log(q, rs[0].records)
    recs = read_run_log(q)
    assert [r.final_alpha for r in recs] == list(rs[0].final_alpha)


def test_window_mean():
    vals = np.arange(1.0, 11.0)
    assert window_mean(vals, EVENTS[0]) == (4.0, pytest.approx(np.mean([1, 2, 6, 7, 8, 9, 10])))


def test_probe_without_commit_leaves_state():
    cfg = SessionConfig(epsilon=0.3, initial_alpha=2.0)
    s = PrivacySession(cfg, M, EVENTS, GRID, seed=4)
    rec = release_geoind(s, 3, commit=False)
    assert s.clock == 0 and s.columns == [] and rec.t == 1


def test_calibration_on_own_history_reproduces_session():
    cfg = SessionConfig(epsilon=0.3, initial_alpha=2.0)
    traj = _traj(4)
    ref = run_session(cfg, traj, M, EVENTS, GRID, seed=np.random.default_rng(9))
    s = PrivacySession(cfg, M, EVENTS, GRID, seed=np.random.default_rng(9))
    recs = calibrate_on_history(s, traj, [(r.released_cell, c) for r, c in zip(ref.records, ref.columns)])
    assert [r.final_alpha for r in recs] == list(ref.final_alpha)
    assert [r.released_cell for r in recs] == [r.released_cell for r in ref.records]
