"""The synthetic experiment protocol: map, mobility, events, repeated seeded runs.

Run ``k`` uses seed ``seed + k`` for both its trajectory and its mechanism
draws, so two configurations with the same ``seed`` and ``runs`` see the same
true trajectories and the same uniforms (shared seeds).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .events import Event, EventKind, GridMap, Region
from .runtime import GEOIND, SessionConfig, SessionResult, replay_trace, run_session
from .simkit import gaussian_transition, generate_trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    width: int = 20
    height: int = 20
    cell_size: float = 1.0         # km
    sigma: float = 5.0             # km, mobility kernel scale
    horizon: int = 50
    region: tuple[int, ...] = tuple(range(10))
    windows: tuple[tuple[int, int], ...] = ((4, 8),)
    kind: str = "presence"
    algorithm: str = GEOIND
    epsilon: float = 0.5
    alpha: float = 0.2
    delta: float = 0.1
    decay: float = 0.5
    time_budget: float = 1.0
    restarts: int = 0
    runs: int = 100
    seed: int = 0

    @property
    def grid(self) -> GridMap:
        return GridMap(self.width, self.height, self.cell_size)

    def session_config(self) -> SessionConfig:
        return SessionConfig(epsilon=self.epsilon, initial_alpha=self.alpha, decay=self.decay,
                             time_budget=self.time_budget, restarts=self.restarts)

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def standard_events(cfg: ExperimentConfig) -> list[Event]:
    m = cfg.grid.m
    region = Region.from_cells(cfg.region, m)
    events = []
    for lo, hi in cfg.windows:
        times = tuple(range(lo, hi + 1))
        events.append(Event(EventKind(cfg.kind), (region,) * len(times), times, name=f"{cfg.kind}[{lo}:{hi}]"))
    return events


def transition_for(cfg: ExperimentConfig) -> np.ndarray:
    return gaussian_transition(cfg.grid, cfg.sigma)


def run_trajectory(cfg: ExperimentConfig, k: int, M=None) -> np.ndarray:
    M = transition_for(cfg) if M is None else M
    m = M.shape[-1]
    return generate_trajectory(M, np.full(m, 1.0 / m), cfg.horizon, seed=[cfg.seed + k, 0])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    events: list[Event]
    results: list[SessionResult] = field(default_factory=list)
    M: np.ndarray | None = field(default=None, repr=False)

    @property
    def alphas(self) -> np.ndarray:
        """runs x T matrix of committed budgets."""
        return np.array([r.final_alpha for r in self.results])

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.distances for r in self.results])

    @property
    def attempts(self) -> np.ndarray:
        return np.array([[rec.attempts for rec in r.records] for r in self.results])

    def replay(self, literal: bool = False, runs: Sequence[int] | None = None, restarts: int = 1):
        """(run index, ReplayReport) for every requested run."""
        M = transition_for(self.config) if self.M is None else self.M
        idx = range(len(self.results)) if runs is None else runs
        return [(k, replay_trace(M, self.events, self.results[k].columns, self.config.epsilon,
                                 literal=literal, restarts=restarts)) for k in idx]


def _one_run(cfg: ExperimentConfig, events, M, trajectory, k: int) -> SessionResult:
    traj = run_trajectory(cfg, k, M) if trajectory is None else trajectory
    res = run_session(cfg.session_config(), traj, M, events, cfg.grid, cfg.algorithm, delta=cfg.delta,
                      seed=np.random.default_rng([cfg.seed + k, 1]))
    res.seed = cfg.seed + k
    return res


def run_experiment(cfg: ExperimentConfig, events: Sequence[Event] | None = None, M=None,
                   trajectory=None, workers: int = 1, progress=None) -> ExperimentResult:
    """All runs of one configuration; ``workers > 1`` shards runs over processes.

    ``M`` and ``trajectory`` replace the synthetic mobility model and the
    per-run sampled trajectories when given.
    """
    M = transition_for(cfg) if M is None else np.asarray(M, dtype=float)
    if M.shape[-1] != cfg.grid.m:
        raise ValueError(f"transition matrix has {M.shape[-1]} states, map has {cfg.grid.m} cells")
    events = standard_events(cfg) if events is None else list(events)
    out = ExperimentResult(cfg, events, M=M)
    if workers > 1 and cfg.runs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_one_run, cfg, events, M, trajectory, k) for k in range(cfg.runs)]
            for k, f in enumerate(futures):
                out.results.append(f.result())
                if progress:
                    progress(k, out.results[-1])
    else:
        for k in range(cfg.runs):
            out.results.append(_one_run(cfg, events, M, trajectory, k))
            if progress:
                progress(k, out.results[-1])
    out.results.sort(key=lambda r: r.seed)
    return out
