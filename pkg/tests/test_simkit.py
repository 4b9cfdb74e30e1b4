import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from priste.events import GridMap
from priste.simkit import (BoundingBox, SyntheticConfig, TrajectoryParseError, estimate_transition,
                           gaussian_transition, generate_transition, generate_trajectory, ingest_csv,
                           snap, write_cell_csv)


def test_gaussian_transition_shape_and_locality():
    grid = GridMap(5, 4, 1.0)
    M = gaussian_transition(grid, 1.0)
    assert M.shape == (20, 20) and np.allclose(M.sum(axis=1), 1.0)
    assert np.all(np.argmax(M, axis=1) == np.arange(20))
    wide = gaussian_transition(grid, 10.0)
    assert np.all(np.diag(wide) < np.diag(M))
    tiny = gaussian_transition(grid, 1e-3)
    assert np.allclose(tiny, np.eye(20))
    with pytest.raises(ValueError):
        gaussian_transition(grid, 0)


def test_synthetic_config():
    cfg = SyntheticConfig(width=3, height=2, sigma=0.5)
    assert generate_transition(cfg).shape == (6, 6)
    with pytest.raises(ValueError):
        SyntheticConfig(horizon=0)


def test_trajectory_is_reproducible():
    M = gaussian_transition(GridMap(4, 4), 1.0)
    pi = np.full(16, 1 / 16)
    a = generate_trajectory(M, pi, 30, seed=7)
    b = generate_trajectory(M, pi, 30, seed=7)
    assert np.array_equal(a, b) and a.shape == (30,)
    assert a.min() >= 0 and a.max() < 16


def test_estimate_recovers_chain():
    M = np.array([[0.8, 0.2], [0.3, 0.7]])
    traj = generate_trajectory(M, [0.5, 0.5], 50000, seed=1)
    est = estimate_transition([traj])
    assert np.allclose(est, M, atol=0.02)


def test_estimate_smoothing():
    est = estimate_transition([[0, 1, 0, 1]], m=3)
    assert np.allclose(est.sum(axis=1), 1.0)
    assert np.all(est > 0)
    assert np.allclose(est[2], 1 / 3)
    with pytest.raises(ValueError):
        estimate_transition([[0, 5]], m=3)


@given(st.lists(st.integers(0, 5), min_size=2, max_size=40))
def test_estimate_is_stochastic(trace):
    est = estimate_transition([trace], m=6)
    assert np.allclose(est.sum(axis=1), 1.0) and est.min() > 0


def test_snap_and_clamp():
    grid = GridMap(4, 2)
    box = BoundingBox(0.0, 2.0, 0.0, 4.0)
    assert snap(0.5, 0.5, grid, box) == (0, False)
    assert snap(1.5, 3.5, grid, box) == (7, False)
    assert snap(-1.0, 10.0, grid, box) == (3, True)
    for cell in range(grid.m):
        assert snap(*box.cell_center(grid, cell), grid, box) == (cell, False)


def test_ingest_cell_rows(tmp_path):
    grid = GridMap(3, 3)
    p = tmp_path / "t.csv"
    write_cell_csv(p, [0, 4, 8])
    tf = ingest_csv(p, grid)
    assert tf.cells.tolist() == [0, 4, 8] and tf.times.tolist() == [1, 2, 3]
    p.write_text("1,2\n2,3\n")
    assert ingest_csv(p, grid).cells.tolist() == [2, 3]


def test_ingest_latlon_rows(tmp_path, caplog):
    grid = GridMap(2, 2)
    box = BoundingBox(10.0, 12.0, 20.0, 22.0)
    p = tmp_path / "t.csv"
    p.write_text("t,lat,lon\n0,10.5,20.5\n5,11.5,21.5\n6,50,21.5\n")
    with caplog.at_level(logging.WARNING):
        tf = ingest_csv(p, grid, box)
    assert tf.cells.tolist() == [0, 3, 3] and tf.clamped == 1
    assert "clamped" in caplog.text


@pytest.mark.parametrize("body,line", [
    ("t,cell\n1,0\n1,1\n", 3),          # repeated timestamp
    ("t,cell\n1,0\n2,99\n", 3),         # off-map cell
    ("t,cell\n1,x\n", 2),               # not a number
    ("when,where\n1,0\n", 1),           # bad header
    ("1,0,0,0\n", 1),                   # wrong width
])
def test_ingest_reports_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(TrajectoryParseError) as err:
        ingest_csv(p, GridMap(3, 3))
    assert err.value.line == line


def test_latlon_needs_box(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,1.0,2.0\n")
    with pytest.raises(TrajectoryParseError):
        ingest_csv(p, GridMap(2, 2))
