"""Streaming release loops: calibrate, check, commit or halve the budget.

A candidate observation is drawn from the current mechanism and tested against
every protected event; on failure the budget is multiplied by ``decay`` and a
fresh candidate is drawn. Once the budget falls below ``alpha_floor`` the
uniform mechanism is used, which always passes. Rejected candidates never
leave the session: only committed cells appear in ``released``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .checker import CheckerConfig, Decision, EventState, check_all_events, check_privacy
from .checker import assemble_conditions, build_check_vectors
from .events import Event, GridMap
from .lppm import (PosteriorState, compute_delta_set, plm_emission_matrix, restricted_plm_emission,
                   sample_row)
from .markov import transition_at, validate_transition

log = logging.getLogger(__name__)

GEOIND = "geoind"
DELTALOC = "deltaloc"


@dataclass(frozen=True)
class SessionConfig:
    epsilon: float
    initial_alpha: float
    decay: float = 0.5
    alpha_floor: float | None = None  # default 2^-20 * initial_alpha
    time_budget: float = 1.0
    tolerance: float = 1e-9
    restarts: int = 0  # exact scan plus local polish; replay adds a random restart
    checker_seed: int = 0

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise ValueError("decay must lie in (0, 1)")
        if not self.initial_alpha > 0:
            raise ValueError("initial_alpha must be positive")
        if self.alpha_floor is None:
            object.__setattr__(self, "alpha_floor", self.initial_alpha * 2.0**-20)

    @property
    def checker(self) -> CheckerConfig:
        return CheckerConfig(epsilon=self.epsilon, time_budget=self.time_budget,
                             tolerance=self.tolerance, restarts=self.restarts, seed=self.checker_seed)


@dataclass
class ReleaseRecord:
    t: int
    true_cell: int
    released_cell: int
    final_alpha: float
    attempts: int
    decision_path: list[Decision] = field(default_factory=list)
    euclid_km: float = 0.0
    uniform: bool = False


class PrivacySession:
    """State of one user's release stream: per-event caches, committed columns, clock."""

    def __init__(self, config: SessionConfig, M, events: Sequence[Event], grid: GridMap,
                 seed=None, pi=None):
        self.config = config
        self.M = validate_transition(M)
        self.grid = grid
        m = grid.m
        if transition_at(self.M, 1).shape[0] != m:
            raise ValueError("transition matrix and map differ in size")
        self.states: list[EventState] = []
        self.dropped: list[Event] = []
        for ev in events:
            st = EventState(ev, self.M)
            if st.degenerate:
                log.warning("event %s has probability 0 or 1 for every prior; not checked",
                            ev.name or ev.to_dict())
                self.dropped.append(ev)
            else:
                self.states.append(st)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.released: list[int] = []
        self.columns: list[np.ndarray] = []
        self.clock = 0
        # prior location belief for the delta-location-set loop
        self.pi = np.full(m, 1.0 / m) if pi is None else np.asarray(pi, dtype=float)
        self.posterior = PosteriorState(self.M, self.pi.copy())
        self._checker = config.checker
        # one block of uniforms per timestamp: attempt k always uses the k-th,
        # so runs that differ only in checker settings stay coupled
        self._draws = int(math.ceil(math.log(config.alpha_floor / config.initial_alpha)
                                    / math.log(config.decay))) + 2

    @property
    def events(self) -> list[Event]:
        return [s.event for s in self.states]

    def commit(self, cell: int, column: np.ndarray) -> None:
        """Fold a released cell and its emission column into every event cache."""
        for st in self.states:
            st.commit(column)
        self.released.append(int(cell))
        self.columns.append(column)
        self.clock += 1

    def _loop(self, true_cell: int, emission_for, commit: bool = True) -> ReleaseRecord:
        """Shared check-commit-or-halve loop; ``emission_for(alpha)`` gives an m x m matrix.

        With ``commit=False`` the accepted candidate is reported but the
        session state is left untouched (the uniforms are still consumed).
        """
        cfg = self.config
        if not 0 <= true_cell < self.grid.m:
            raise IndexError(f"cell {true_cell} outside map")
        alpha = cfg.initial_alpha
        path: list[Decision] = []
        attempts = 0
        draws = self.rng.random(self._draws)
        while True:
            attempts += 1
            uniform = alpha < cfg.alpha_floor
            E = emission_for(0.0 if uniform else alpha)
            u = draws[attempts - 1] if attempts <= draws.size else self.rng.random()
            cell = sample_row(E[true_cell], u)
            column = np.ascontiguousarray(E[:, cell])
            if uniform:
                # the alpha = 0 limit reproduces the previous step's condition
                path.append(Decision.HOLDS)
                alpha = 0.0
                break
            if not self.states:
                path.append(Decision.HOLDS)
                break
            res = check_all_events(self.states, column, self._checker)
            path.append(res.decision)
            if res.decision is Decision.HOLDS:
                break
            alpha *= cfg.decay
        if commit:
            self.commit(cell, column)
        return ReleaseRecord(t=self.clock if commit else self.clock + 1, true_cell=int(true_cell), released_cell=cell,
                             final_alpha=alpha, attempts=attempts, decision_path=path,
                             euclid_km=self.grid.distance(true_cell, cell), uniform=uniform)


def release_geoind(session: PrivacySession, true_cell: int, commit: bool = True) -> ReleaseRecord:
    """One timestamp of the planar Laplace loop."""
    grid = session.grid

    def emission(alpha):
        return plm_emission_matrix(alpha, grid) if alpha > 0 else np.full((grid.m, grid.m), 1.0 / grid.m)

    return session._loop(int(true_cell), emission, commit)


def release_deltaloc(session: PrivacySession, true_cell: int, delta: float) -> ReleaseRecord:
    """One timestamp of the delta-location-set loop; updates the session posterior on commit."""
    post = session.posterior
    # p_0^+ is the assumed prior, so every step (including the first) applies M
    post.p_minus = post.p_plus @ transition_at(session.M, session.clock + 1)
    dset = compute_delta_set(post.p_minus, delta)
    grid = session.grid
    rec = session._loop(int(true_cell), lambda a: restricted_plm_emission(a, grid, dset))
    post.update(session.columns[-1])
    return rec


def calibrate_on_history(session: PrivacySession, trajectory: Sequence[int],
                         history: Sequence[tuple[int, np.ndarray]]) -> list[ReleaseRecord]:
    """Planar Laplace calibration at every timestamp against a fixed release history.

    At timestamp ``t`` the loop runs on the true cell without committing its
    result; ``history[t]`` (cell, emission column) is committed instead. The
    check requests thus do not depend on the checker's own earlier
    decisions, which isolates the effect of checker settings.
    """
    records = []
    for cell, (h_cell, h_col) in zip(trajectory, history):
        records.append(release_geoind(session, int(cell), commit=False))
        session.commit(h_cell, np.asarray(h_col, dtype=float))
    return records


# --------------------------------------------------------------------------
# replay


@dataclass
class ReplayReport:
    passed: bool
    failures: list[tuple[int, str, str]] = field(default_factory=list)  # (t, event, decision)

    def __bool__(self):
        return self.passed


def replay_trace(M, events: Sequence[Event], columns: Sequence[np.ndarray], epsilon: float,
                 time_budget: float = 5.0, literal: bool = False, tolerance: float = 1e-9,
                 restarts: int = 1) -> ReplayReport:
    """Re-run the check at every timestamp of a committed trace.

    ``literal=True`` rebuilds the vectors from scratch at each step instead of
    using the incremental caches (slower, independent of them).
    """
    M = validate_transition(M)
    cfg = CheckerConfig(epsilon=epsilon, time_budget=time_budget, tolerance=tolerance, restarts=restarts)
    failures = []
    for ev in events:
        st = EventState(ev, M)
        if st.degenerate:
            continue
        for k, col in enumerate(columns):
            if literal:
                conds = assemble_conditions(build_check_vectors(ev, M, np.asarray(columns[:k + 1])), epsilon)
            else:
                conds = st.conditions(col, epsilon)
            res = check_privacy(conds, cfg)
            if res.decision is not Decision.HOLDS:
                failures.append((k + 1, ev.name or str(ev.to_dict()), res.decision.value))
            if not literal:
                st.commit(col)
    return ReplayReport(not failures, failures)


# --------------------------------------------------------------------------
# sessions and aggregation


@dataclass
class SessionResult:
    records: list[ReleaseRecord]
    columns: list[np.ndarray]
    events: list[Event]
    seed: int | None = None

    @property
    def final_alpha(self) -> np.ndarray:
        return np.array([r.final_alpha for r in self.records])

    @property
    def distances(self) -> np.ndarray:
        return np.array([r.euclid_km for r in self.records])


def run_session(config: SessionConfig, trajectory: Sequence[int], M, events: Sequence[Event],
                grid: GridMap, algorithm: str = GEOIND, delta: float = 0.0, seed=None) -> SessionResult:
    """Release a whole trajectory with one algorithm."""
    session = PrivacySession(config, M, events, grid, seed=seed)
    records = []
    for cell in trajectory:
        if algorithm == GEOIND:
            records.append(release_geoind(session, int(cell)))
        elif algorithm == DELTALOC:
            records.append(release_deltaloc(session, int(cell), delta))
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    return SessionResult(records, session.columns, session.events,
                         seed if isinstance(seed, (int, np.integer)) else None)


@dataclass
class Summary:
    t: np.ndarray
    mean_alpha: np.ndarray
    sd_alpha: np.ndarray
    mean_dist: np.ndarray
    sd_dist: np.ndarray

    def rows(self):
        return zip(self.t, self.mean_alpha, self.sd_alpha, self.mean_dist, self.sd_dist)


def summarize(results: Sequence[SessionResult]) -> Summary:
    """Per-timestamp mean and sample standard deviation across runs."""
    if not results:
        raise ValueError("nothing to summarize")
    # order-independent: reduce in seed order
    results = sorted(results, key=lambda r: (r.seed is None, r.seed or 0))
    A = np.array([r.final_alpha for r in results])
    D = np.array([r.distances for r in results])
    ddof = 1 if len(results) > 1 else 0
    return Summary(np.arange(1, A.shape[1] + 1), A.mean(0), A.std(0, ddof=ddof), D.mean(0), D.std(0, ddof=ddof))


RUN_LOG_HEADER = ["t", "true_cell", "released_cell", "final_alpha", "attempts", "euclid_km"]
SUMMARY_HEADER = ["t", "mean_alpha", "sd_alpha", "mean_dist", "sd_dist"]


def write_run_log(path, records: Sequence[ReleaseRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUN_LOG_HEADER)
        for r in records:
            w.writerow([r.t, r.true_cell, r.released_cell, repr(float(r.final_alpha)), r.attempts,
                        repr(float(r.euclid_km))])


def read_run_log(path) -> list[ReleaseRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_LOG_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [ReleaseRecord(int(r["t"]), int(r["true_cell"]), int(r["released_cell"]),
                              float(r["final_alpha"]), int(r["attempts"]), euclid_km=float(r["euclid_km"]))
                for r in reader]


def write_summary(path, summary: Summary) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for t, ma, sa, md, sd in summary.rows():
            w.writerow([int(t)] + [repr(float(x)) for x in (ma, sa, md, sd)])


def read_summary(path) -> Summary:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return Summary(data[:, 0].astype(int), *(data[:, k] for k in range(1, 5)))


def window_mean(values: np.ndarray, event: Event) -> tuple[float, float]:
    """Mean over timestamps inside the event window and outside it."""
    t = np.arange(1, values.shape[-1] + 1)
    inside = (t >= event.start) & (t <= event.end)
    return float(values[..., inside].mean()), float(values[..., ~inside].mean())


def expected_alpha(initial: float, decay: float, attempts: int) -> float:
    return initial * decay ** (attempts - 1)


def isclose_alpha(rec: ReleaseRecord, config: SessionConfig) -> bool:
    if rec.uniform:
        return rec.final_alpha == 0.0
    return math.isclose(rec.final_alpha, expected_alpha(config.initial_alpha, config.decay, rec.attempts))
