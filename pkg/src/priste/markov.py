"""Two-world lifting of a Markov mobility model and exact event probabilities.

The lifted chain has ``2m`` states: ``[0, m)`` is the world where the event is
(still) false, ``[m, 2m)`` the world where it is true. Lifted matrices are
applied block-wise and never multiplied together, so every quantity here is a
chain of vector-matrix products.

Transition input ``M`` is either one ``(m, m)`` row-stochastic matrix or a
``(K, m, m)`` stack where ``M[t - 1]`` drives the step from ``t`` to ``t + 1``.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .events import Event, EventKind

ROW_SUM_TOL = 1e-9
# Reported when the observations fully disclose the event (division by zero).
RATIO_CAP = 1e12


class DegenerateEventError(ValueError):
    """Pr(Event) is 0 or 1, so the conditional likelihoods are undefined."""


class InconsistentObservationError(ValueError):
    """The observation sequence has zero probability under the model."""


# --------------------------------------------------------------------------
# validation and I/O


def validate_transition(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim not in (2, 3) or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"transition matrix must be (m, m) or (K, m, m), got {M.shape}")
    if np.any(M < 0) or np.any(M > 1):
        raise ValueError("transition probabilities must lie in [0, 1]")
    if np.any(np.abs(M.sum(axis=-1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("transition matrix rows must sum to 1")
    return M


def validate_distribution(pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or np.any(pi < 0) or np.any(pi > 1) or abs(pi.sum() - 1.0) > ROW_SUM_TOL:
        raise ValueError("initial distribution must be a probability vector")
    return pi


def load_transition_csv(path) -> np.ndarray:
    M = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    return validate_transition(M)


def save_transition_csv(M, path) -> None:
    np.savetxt(Path(path), np.asarray(M), delimiter=",", fmt="%.17g")


def transition_at(M: np.ndarray, t: int) -> np.ndarray:
    """The ``m x m`` matrix for the step from timestamp ``t`` to ``t + 1``."""
    if t < 1:
        raise ValueError("transition steps are 1-based")
    if M.ndim == 2:
        return M
    if t > M.shape[0]:
        raise ValueError(f"time-varying model has {M.shape[0]} steps, step {t} requested")
    return M[t - 1]


def _as_columns(emissions) -> np.ndarray:
    E = np.asarray(emissions, dtype=float)
    if E.ndim == 1:
        E = E[None, :]
    return E


# --------------------------------------------------------------------------
# lifting


def step_kind(event: Event, t: int) -> tuple[str, np.ndarray | None]:
    """Classify the lifted step ``t -> t+1``.

    Returns ``("split", s)``, ``("filter", s)`` or ``("plain", None)`` where
    ``s`` is the float indicator of the region active at arrival ``t + 1``.
    """
    if event.kind is EventKind.PRESENCE:
        if event.start - 1 <= t <= event.end - 1:
            return "split", event.region_at(t + 1).as_float()
    else:
        if t == event.start - 1:
            return "split", event.region_at(t + 1).as_float()
        if event.start <= t <= event.end - 1:
            return "filter", event.region_at(t + 1).as_float()
    return "plain", None


def lift_transition(M, event: Event, t: int) -> np.ndarray:
    """Dense ``2m x 2m`` lifted matrix for step ``t``."""
    M = validate_transition(M)
    Mt = transition_at(M, t)
    m = Mt.shape[0]
    if m != event.m:
        raise ValueError(f"transition matrix is {m}x{m} but event map has {event.m} cells")
    kind, s = step_kind(event, t)
    L = np.zeros((2 * m, 2 * m))
    if kind == "plain":
        L[:m, :m] = Mt
        L[m:, m:] = Mt
    elif kind == "split":
        L[:m, :m] = Mt * (1 - s)
        L[:m, m:] = Mt * s
        L[m:, m:] = Mt
    else:
        L[:m, :m] = Mt
        L[m:, :m] = Mt * (1 - s)
        L[m:, m:] = Mt * s
    return L


def lifted_step(x: np.ndarray, Mt: np.ndarray, event: Event, t: int) -> np.ndarray:
    """Row-vector product ``x @ lift_transition(M, event, t)``; ``x`` may be (k, 2m)."""
    m = Mt.shape[0]
    u = x[..., :m] @ Mt
    w = x[..., m:] @ Mt
    kind, s = step_kind(event, t)
    if kind == "plain":
        return np.concatenate([u, w], axis=-1)
    if kind == "split":
        return np.concatenate([u * (1 - s), u * s + w], axis=-1)
    return np.concatenate([u + w * (1 - s), w * s], axis=-1)


def lifted_step_col(y: np.ndarray, Mt: np.ndarray, event: Event, t: int) -> np.ndarray:
    """Column-vector product ``lift_transition(M, event, t) @ y``."""
    m = Mt.shape[0]
    y1, y2 = y[:m], y[m:]
    kind, s = step_kind(event, t)
    if kind == "plain":
        return np.concatenate([Mt @ y1, Mt @ y2])
    mixed = Mt @ ((1 - s) * y1 + s * y2)
    if kind == "split":
        return np.concatenate([mixed, Mt @ y2])
    return np.concatenate([Mt @ y1, mixed])


def initial_projector(event: Event) -> np.ndarray:
    """``m x 2m`` map from an initial distribution to the lifted initial vector.

    ``[I, 0]`` when the event starts after timestamp 1. An event starting at 1
    has no transition into its window, so the first region splits the
    initial mass directly: ``[diag(1 - s_1), diag(s_1)]``.
    """
    m = event.m
    if event.start > 1:
        return np.hstack([np.eye(m), np.zeros((m, m))])
    s = event.regions[0].as_float()
    return np.hstack([np.diag(1 - s), np.diag(s)])


def lift_initial(pi, event: Event) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if event.start > 1:
        return np.concatenate([pi, np.zeros_like(pi)])
    s = event.regions[0].as_float()
    return np.concatenate([pi * (1 - s), pi * s])


def lift_emission(column) -> np.ndarray:
    column = np.asarray(column, dtype=float)
    return np.concatenate([column, column])


def true_world(m: int) -> np.ndarray:
    return np.concatenate([np.zeros(m), np.ones(m)])


def event_vector(event: Event, M) -> np.ndarray:
    """``a = prod_{i=1}^{end-1} M_i [0, 1]^T``: Pr(Event | lifted state at t=1)."""
    M = np.asarray(M, dtype=float)
    return propagate_to_end(true_world(event.m), event, M, 1)


def propagate_to_end(y: np.ndarray, event: Event, M: np.ndarray, t: int) -> np.ndarray:
    """``prod_{i=t}^{end-1} M_i y`` (identity when ``t >= end``)."""
    for i in range(event.end - 1, t - 1, -1):
        y = lifted_step_col(y, transition_at(M, i), event, i)
    return y


# --------------------------------------------------------------------------
# probabilities


def prior_probability(pi, event: Event, M) -> float:
    """Pr(Event) = [pi, 0] M_1 ... M_{end-1} [0, 1]^T."""
    M = validate_transition(M)
    pi = validate_distribution(pi)
    if pi.shape[0] != event.m:
        raise ValueError("initial distribution and event map differ in size")
    x = lift_initial(pi, event)
    for t in range(1, event.end):
        x = lifted_step(x, transition_at(M, t), event, t)
    return float(x[event.m:].sum())


def _forward(x: np.ndarray, event: Event, M: np.ndarray, E: np.ndarray, upto: int):
    """Scaled lifted forward pass over observations ``1..upto``.

    Returns the normalized forward vector at ``upto`` and the log of the
    removed scale.
    """
    log_scale = 0.0
    x = x * lift_emission(E[0])
    for t in range(2, upto + 1):
        x = lifted_step(x, transition_at(M, t - 1), event, t - 1) * lift_emission(E[t - 1])
        z = x.sum()
        if z <= 0:
            break
        x = x / z
        log_scale += math.log(z)
    return x, log_scale


def _log_joint_terms(pi, event: Event, M, emissions, target: np.ndarray | None = None):
    """(scaled joint of Event, scaled total likelihood, shared log scale).

    ``target`` selects the world whose joint is returned; the default is the
    event-true copy.
    """
    M = validate_transition(M)
    pi = validate_distribution(pi)
    E = _as_columns(emissions)
    t = E.shape[0]
    m = event.m
    if t < 1:
        raise ValueError("need at least one observation")
    target = true_world(m) if target is None else target
    if t <= event.end:
        # before/during the event: forward to t, then the prior chain to end
        x, log_scale = _forward(lift_initial(pi, event), event, M, E, t)
        joint = float(x @ propagate_to_end(target, event, M, t))
        total = float(x.sum())
        return joint, total, log_scale
    # after the event: forward vector at end, backward vector from t to end
    alpha, log_a = _forward(lift_initial(pi, event), event, M, E, event.end)
    beta = np.ones(2 * m)
    log_b = 0.0
    for i in range(t - 1, event.end - 1, -1):
        beta = lifted_step_col(beta * lift_emission(E[i]), transition_at(M, i), event, i)
        z = beta.max()
        if z <= 0:
            break
        beta = beta / z
        log_b += math.log(z)
    joint = float(alpha @ (beta * target))
    total = float(alpha @ beta)
    return joint, total, log_a + log_b


def joint_probability(pi, event: Event, M, emissions) -> float:
    """Pr(Event, o_1..o_t) for emission columns ``emissions[0..t-1]``."""
    joint, _, log_scale = _log_joint_terms(pi, event, M, emissions)
    return joint * math.exp(log_scale)


def complement_joint_probability(pi, event: Event, M, emissions) -> float:
    """Pr(not Event, o_1..o_t), read from the event-false copy of the lifted chain."""
    joint, _, log_scale = _log_joint_terms(pi, event, M, emissions, 1.0 - true_world(event.m))
    return joint * math.exp(log_scale)


def observation_likelihood(pi, M, emissions) -> float:
    """Pr(o_1..o_t) by the plain (unlifted) scaled forward algorithm."""
    M = validate_transition(M)
    E = _as_columns(emissions)
    x = np.asarray(pi, dtype=float) * E[0]
    log_scale = 0.0
    for t in range(2, E.shape[0] + 1):
        z = x.sum()
        if z <= 0:
            return 0.0
        x = (x / z) @ transition_at(M, t - 1) * E[t - 1]
        log_scale += math.log(z)
    return float(x.sum()) * math.exp(log_scale)


def forward_backward_posterior(pi, M, emissions) -> np.ndarray:
    """Smoothed marginals ``Pr(l_t = s_k | o_1..o_T)`` as an ``m x T`` matrix."""
    M = validate_transition(M)
    E = _as_columns(emissions)
    T, m = E.shape
    alpha = np.empty((T, m))
    a = np.asarray(pi, dtype=float) * E[0]
    for t in range(T):
        if t > 0:
            a = alpha[t - 1] @ transition_at(M, t) * E[t]
        z = a.sum()
        if z <= 0:
            raise InconsistentObservationError(f"observation {t + 1} has zero probability")
        alpha[t] = a / z
    beta = np.ones((T, m))
    for t in range(T - 2, -1, -1):
        b = transition_at(M, t + 1) @ (E[t + 1] * beta[t + 1])
        beta[t] = b / b.max()
    post = alpha * beta
    norm = post.sum(axis=1, keepdims=True)
    if np.any(norm <= 0):
        raise InconsistentObservationError("zero normalizer in smoothing pass")
    return (post / norm).T


def leakage_ratio(pi, event: Event, M, emissions) -> float:
    """max(r, 1/r) for r = Pr(o|Event) / Pr(o|not Event) under a fixed prior."""
    prior = prior_probability(pi, event, M)
    if prior <= 0.0 or prior >= 1.0:
        raise DegenerateEventError(f"Pr(Event) = {prior}; ratio undefined")
    joint, total, _ = _log_joint_terms(pi, event, M, emissions)
    joint_not = max(total - joint, 0.0)
    if joint <= 0 and joint_not <= 0:
        raise InconsistentObservationError("observations have zero probability")
    if joint <= 0 or joint_not <= 0:
        return RATIO_CAP
    r = (joint / prior) / (joint_not / (1.0 - prior))
    return float(min(max(r, 1.0 / r), RATIO_CAP))
