"""Brute-force reference computations by trajectory enumeration.

Everything here is exponential on purpose; it exists to check the two-world
engine and to serve as the runtime baseline. Do not optimize it beyond
vectorizing the enumeration.
"""
from __future__ import annotations

import itertools

import numpy as np

from .events import Event, EventKind, evaluate_event
from .markov import _as_columns, transition_at, validate_transition

DEFAULT_CAP = 10**6


class EnumerationTooLarge(ValueError):
    pass


def enumerate_trajectories(m: int, horizon: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """All ``m**horizon`` cell sequences in lexicographic order, shape (n, horizon)."""
    n = m**horizon
    if n > cap:
        raise EnumerationTooLarge(f"{m}^{horizon} = {n} trajectories exceeds cap {cap}")
    return np.stack(np.unravel_index(np.arange(n), (m,) * horizon), axis=1) if horizon else \
        np.zeros((1, 0), dtype=int)


def trajectory_probabilities(pi, M, trajs: np.ndarray) -> np.ndarray:
    """Chain probability pi[x1] prod M_t[x_t, x_{t+1}] of each row of ``trajs``."""
    p = np.asarray(pi, dtype=float)[trajs[:, 0]]
    for t in range(1, trajs.shape[1]):
        p = p * transition_at(M, t)[trajs[:, t - 1], trajs[:, t]]
    return p


def event_indicator(event: Event, trajs: np.ndarray) -> np.ndarray:
    hits = np.stack([region.mask[trajs[:, t - 1]] for region, t in zip(event.regions, event.times)], axis=1)
    return hits.any(axis=1) if event.kind is EventKind.PRESENCE else hits.all(axis=1)


def naive_prior(pi, M, event: Event, cap: int = DEFAULT_CAP) -> float:
    M = validate_transition(M)
    trajs = enumerate_trajectories(event.m, event.end, cap)
    p = trajectory_probabilities(pi, M, trajs)
    return float(p[event_indicator(event, trajs)].sum())


def _emission_weights(E: np.ndarray, trajs: np.ndarray) -> np.ndarray:
    w = np.ones(trajs.shape[0])
    for t in range(E.shape[0]):
        w = w * E[t][trajs[:, t]]
    return w


def naive_joint(pi, M, event: Event, emissions, cap: int = DEFAULT_CAP) -> float:
    """Pr(Event, o_1..o_t) over the full horizon ``max(t, end)``.

    Timestamps without an observation are marginalized by enumeration.
    """
    M = validate_transition(M)
    E = _as_columns(emissions)
    horizon = max(E.shape[0], event.end)
    trajs = enumerate_trajectories(event.m, horizon, cap)
    p = trajectory_probabilities(pi, M, trajs) * _emission_weights(E, trajs)
    return float(p[event_indicator(event, trajs)].sum())


def naive_likelihood(pi, M, emissions, cap: int = DEFAULT_CAP) -> float:
    M = validate_transition(M)
    E = _as_columns(emissions)
    trajs = enumerate_trajectories(E.shape[1], E.shape[0], cap)
    return float((trajectory_probabilities(pi, M, trajs) * _emission_weights(E, trajs)).sum())


def naive_posterior(pi, M, emissions, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``m x T`` smoothed marginals by direct Bayes over all trajectories."""
    M = validate_transition(M)
    E = _as_columns(emissions)
    T, m = E.shape
    trajs = enumerate_trajectories(m, T, cap)
    p = trajectory_probabilities(pi, M, trajs) * _emission_weights(E, trajs)
    out = np.zeros((m, T))
    for t in range(T):
        out[:, t] = np.bincount(trajs[:, t], weights=p, minlength=m)
    return out / p.sum()


def naive_ratio(pi, M, event: Event, emissions, cap: int = DEFAULT_CAP) -> float:
    """Pr(o | Event) / Pr(o | not Event) by enumeration (not symmetrized)."""
    prior = naive_prior(pi, M, event, cap)
    joint = naive_joint(pi, M, event, emissions, cap)
    total = naive_likelihood(pi, M, emissions, cap)
    return (joint / prior) / ((total - joint) / (1 - prior))


def pattern_trajectories(event: Event):
    """Iterate the window trajectories that render a PATTERN (regions' product)."""
    if event.kind is not EventKind.PATTERN:
        raise ValueError("only PATTERN events have an enumerable trajectory set")
    return itertools.product(*(r.cells for r in event.regions))


def naive_pattern_joint(p_before, M, event: Event, emissions) -> tuple[float, int]:
    """Window-only joint probability of a PATTERN, one trajectory at a time.

    ``p_before`` is the location distribution at ``start - 1`` and
    ``emissions[k]`` the column for timestamp ``start + k``. Returns the sum
    and the number of trajectories visited. With ``start == 1`` pass the
    initial distribution and ``M`` is not applied before the first step.
    """
    M = np.asarray(M, dtype=float)
    E = _as_columns(emissions)
    start = event.start
    if start > 1:
        first = (np.asarray(p_before, dtype=float) @ transition_at(M, start - 1)) * E[0]
    else:
        first = np.asarray(p_before, dtype=float) * E[0]
    total = 0.0
    count = 0
    for traj in pattern_trajectories(event):
        p = first[traj[0]]
        for k in range(1, len(traj)):
            t = start + k
            p *= transition_at(M, t - 1)[traj[k - 1], traj[k]] * E[k][traj[k]]
        total += p
        count += 1
    return total, count


def naive_event_truth(event: Event, trajs: np.ndarray) -> np.ndarray:
    """Row-by-row evaluation through :func:`evaluate_event` (slow, literal)."""
    return np.array([evaluate_event(event, row) for row in trajs])


# --------------------------------------------------------------------------
# grid oracle for the checker


def simplex_grid(m: int, resolution: float = 0.02) -> np.ndarray:
    """All points of the simplex whose coordinates are multiples of ``resolution``."""
    n = int(round(1.0 / resolution))
    pts = np.zeros((1, 0), dtype=np.int32)
    remaining = np.array([n])
    for _ in range(m - 1):
        reps = remaining + 1
        idx = np.repeat(np.arange(pts.shape[0]), reps)
        offs = np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps)
        pts = np.column_stack([pts[idx], offs])
        remaining = remaining[idx] - offs
    pts = np.column_stack([pts, remaining])
    return pts / n


def grid_maximum(condition, resolution: float = 0.02, chunk: int = 200_000) -> tuple[float, np.ndarray]:
    """Maximum of a condition's objective over :func:`simplex_grid`."""
    pts = simplex_grid(condition.m, resolution)
    best, arg = -np.inf, None
    for lo in range(0, pts.shape[0], chunk):
        vals = condition.objective(pts[lo:lo + chunk])
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, arg = float(vals[k]), pts[lo + k]
    return best, arg
