"""Runtime comparisons: trajectory enumeration vs the two-world computation.

Every timed unit computes the joint probability of a PATTERN event and the
observations inside its window, with the event starting at timestamp 2 and
the initial distribution as the location belief at timestamp 1.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checker import CheckerConfig, assemble_conditions, build_check_vectors, check_privacy
from .events import Event, EventKind, GridMap, Region
from .lppm import plm_emission_matrix
from .markov import joint_probability
from .oracle import naive_pattern_joint
from .simkit import gaussian_transition

BENCH_HEADER = ["method", "sweep", "x", "mean_runtime", "sd_runtime", "n_events", "max_rel_diff"]


@dataclass
class BenchConfig:
    grid_side: int = 4            # m = grid_side ** 2
    sigma: float = 1.0
    alpha: float = 1.0
    lengths: Sequence[int] = (5, 6, 7, 8, 9, 10, 11, 12)
    length_width: int = 2
    widths: Sequence[int] = (2, 3, 4, 5, 6)
    width_length: int = 5
    map_sides: Sequence[int] = (4, 6, 8, 10, 12, 14, 16)
    events_per_point: int = 10
    repeats: int = 5              # timing repeats for the fast method
    ceiling: float = 120.0        # seconds; later points are skipped once exceeded
    seed: int = 0


@dataclass
class BenchPoint:
    method: str
    sweep: str
    x: int
    runtimes: list[float] = field(default_factory=list)
    max_rel_diff: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.runtimes))

    @property
    def sd(self) -> float:
        return float(np.std(self.runtimes, ddof=1)) if len(self.runtimes) > 1 else 0.0


def random_pattern(m: int, width: int, length: int, rng: np.random.Generator, start: int = 2) -> Event:
    regions = [Region.from_cells(rng.choice(m, size=width, replace=False), m) for _ in range(length)]
    return Event(EventKind.PATTERN, tuple(regions), tuple(range(start, start + length)))


def _timed(fn: Callable[[], float], repeats: int) -> tuple[float, float]:
    """(value, best-of-``repeats`` wall time per call)."""
    best = np.inf
    val = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        val = fn()
        best = min(best, time.perf_counter() - t0)
    return val, best


def _instance(event: Event, M: np.ndarray, E: np.ndarray, pi: np.ndarray, rng):
    """Random observations for the window and the matching emission stack (t = 1..end)."""
    m = M.shape[0]
    obs = rng.integers(m, size=event.length)
    cols = np.ones((event.end, m))      # t = 1 carries no observation
    for k, o in enumerate(obs):
        cols[event.start - 1 + k] = E[:, o]
    return cols


def compare_pattern(event: Event, M, E, pi, rng, repeats: int):
    """Time both methods on one event; returns (oracle_time, two_world_time, rel_diff)."""
    cols = _instance(event, M, E, pi, rng)
    window = cols[event.start - 1:]
    (ref, _), t_oracle = _timed(lambda: naive_pattern_joint(pi, M, event, window), 1)
    val, t_fast = _timed(lambda: joint_probability(pi, event, M, cols), repeats)
    return t_oracle, t_fast, abs(val - ref) / max(abs(ref), 1e-300)


def _sweep(name: str, xs, make_event, M, E, pi, cfg: BenchConfig, rng, log) -> list[BenchPoint]:
    points = []
    t_start = time.perf_counter()
    for x in xs:
        if time.perf_counter() - t_start > cfg.ceiling:
            log(f"{name}: wall-clock ceiling reached, skipping x >= {x}")
            break
        po, pf = BenchPoint("oracle", name, x), BenchPoint("two_world", name, x)
        for _ in range(cfg.events_per_point):
            t_o, t_f, diff = compare_pattern(make_event(x), M, E, pi, rng, cfg.repeats)
            po.runtimes.append(t_o)
            pf.runtimes.append(t_f)
            po.max_rel_diff = pf.max_rel_diff = max(pf.max_rel_diff, diff)
        log(f"{name} x={x}: oracle {po.mean:.3g}s two-world {pf.mean:.3g}s diff {pf.max_rel_diff:.1e}")
        points += [po, pf]
    return points


def length_sweep(cfg: BenchConfig, log=lambda s: None) -> list[BenchPoint]:
    grid = GridMap(cfg.grid_side, cfg.grid_side)
    M = gaussian_transition(grid, cfg.sigma)
    E = plm_emission_matrix(cfg.alpha, grid)
    pi = np.full(grid.m, 1.0 / grid.m)
    rng = np.random.default_rng([cfg.seed, 1])
    return _sweep("length", cfg.lengths, lambda L: random_pattern(grid.m, cfg.length_width, L, rng),
                  M, E, pi, cfg, rng, log)


def width_sweep(cfg: BenchConfig, log=lambda s: None) -> list[BenchPoint]:
    grid = GridMap(cfg.grid_side, cfg.grid_side)
    M = gaussian_transition(grid, cfg.sigma)
    E = plm_emission_matrix(cfg.alpha, grid)
    pi = np.full(grid.m, 1.0 / grid.m)
    rng = np.random.default_rng([cfg.seed, 2])
    return _sweep("width", cfg.widths, lambda w: random_pattern(grid.m, w, cfg.width_length, rng),
                  M, E, pi, cfg, rng, log)


def checker_path_sweep(cfg: BenchConfig, log=lambda s: None) -> list[BenchPoint]:
    """Time one full non-incremental check (vectors + maximization) against map size."""
    rng = np.random.default_rng([cfg.seed, 3])
    points = []
    t_start = time.perf_counter()
    for side in cfg.map_sides:
        if time.perf_counter() - t_start > cfg.ceiling:
            log(f"map: wall-clock ceiling reached, skipping side >= {side}")
            break
        grid = GridMap(side, side)
        m = grid.m
        M = gaussian_transition(grid, cfg.sigma * side / cfg.grid_side)
        E = plm_emission_matrix(cfg.alpha, grid)
        ccfg = CheckerConfig(epsilon=1.0, time_budget=60.0, restarts=0)
        p = BenchPoint("checker", "map_size", m)
        for _ in range(max(1, cfg.events_per_point // 2)):
            width = max(1, m // 8)
            ev = Event(EventKind.PRESENCE,
                       tuple(Region.from_cells(rng.choice(m, size=width, replace=False), m) for _ in range(5)),
                       tuple(range(2, 7)))
            cols = E[:, rng.integers(m, size=ev.end)].T

            def run():
                return check_privacy(assemble_conditions(build_check_vectors(ev, M, cols), 1.0), ccfg)

            _, dt = _timed(run, max(1, cfg.repeats // 2))
            p.runtimes.append(dt)
        log(f"map m={m}: checker {p.mean:.3g}s")
        points.append(p)
    return points


def loglinear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares fit of log(y) = a + b x; returns (a, b, R^2)."""
    return _fit(np.asarray(x, dtype=float), np.log(np.asarray(y, dtype=float)))


def loglog_fit(x, y) -> tuple[float, float, float]:
    """Least-squares fit of log(y) = a + b log(x); ``b`` is the polynomial degree."""
    return _fit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))


def _fit(x, ly):
    b, a = np.polyfit(x, ly, 1)
    resid = ly - (a + b * x)
    ss = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    return float(a), float(b), r2


def write_bench_csv(path, points: Sequence[BenchPoint]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_HEADER)
        for p in points:
            w.writerow([p.method, p.sweep, p.x, repr(p.mean), repr(p.sd), len(p.runtimes), repr(p.max_rel_diff)])


def read_bench_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
