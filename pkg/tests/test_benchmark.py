import numpy as np
import pytest

from priste.benchmark import (BENCH_HEADER, BenchConfig, BenchPoint, checker_path_sweep, length_sweep,
                              loglinear_fit, loglog_fit, random_pattern, read_bench_csv, width_sweep,
                              write_bench_csv)


def test_fits_recover_exact_models():
    x = np.arange(1, 8)
    a, b, r2 = loglinear_fit(x, 3 * 2.0**x)
    assert b == pytest.approx(np.log(2)) and r2 == pytest.approx(1.0)
    a, b, r2 = loglog_fit(x, 5 * x**2.5)
    assert b == pytest.approx(2.5) and r2 == pytest.approx(1.0)


def test_random_pattern_shape():
    ev = random_pattern(16, 3, 4, np.random.default_rng(0))
    assert ev.times == (2, 3, 4, 5) and all(len(r.cells) == 3 for r in ev.regions)


def test_small_sweeps_agree_and_roundtrip(tmp_path):
    cfg = BenchConfig(lengths=(3, 4), widths=(2, 3), width_length=3, map_sides=(3, 4),
                      events_per_point=2, repeats=1)
    pts = length_sweep(cfg) + width_sweep(cfg) + checker_path_sweep(cfg)
    assert all(p.max_rel_diff < 1e-12 for p in pts if p.method != "checker")
    assert len(pts) == 10
    p = tmp_path / "b.csv"
    write_bench_csv(p, pts)
    rows = read_bench_csv(p)
    assert list(rows[0]) == BENCH_HEADER and len(rows) == 10


def test_point_stats():
    p = BenchPoint("oracle", "length", 5, [1.0, 3.0])
    assert p.mean == 2.0 and p.sd == pytest.approx(np.sqrt(2))
    assert BenchPoint("x", "y", 1, [4.0]).sd == 0.0
