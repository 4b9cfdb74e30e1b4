"""Release-time privacy check against adversaries with arbitrary initial priors.

For a candidate observation the two conditions

    f1(pi) = (e^eps - 1) Pa Pb - e^eps Pa Pc + Pb <= 0
    f2(pi) = (e^eps - 1) Pa Pb + Pa Pc - e^eps Pb <= 0

must hold for every initial distribution ``pi``, where ``Pa = pi.u`` is the
prior of the event, ``Pb = pi.v`` the joint with the observations and
``Pc = pi.w`` the observation likelihood. ``f1 <= 0`` and ``f2 <= 0`` are the
two directions of the likelihood-ratio bound after clearing the positive
denominators ``Pa (1 - Pa)``.

Each objective has the form ``(pi.u)(pi.z) + pi.l``. As a function of
the image point ``(pi.u, pi.z, pi.l)`` its Hessian is indefinite, so the
maximum over the simplex is reached on a 2-face of the convex hull of the
``m`` image points. The exact scan below evaluates every vertex, every edge
and every hull facet in closed form; projected-gradient ascent from several
starts then cross-checks the result.
"""
from __future__ import annotations

import enum
import functools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .events import Event
from .markov import (DegenerateEventError, _as_columns, event_vector, initial_projector,
                     lift_emission, lifted_step, lifted_step_col, propagate_to_end, transition_at,
                     true_world, validate_transition)


class Decision(enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    UNKNOWN = "unknown"


class Regime(enum.Enum):
    AT_OR_BEFORE_END = "at_or_before_end"
    AFTER_END = "after_end"


class FeasibleSet(enum.Enum):
    SIMPLEX = "simplex"
    BOX = "box"


@dataclass(frozen=True)
class CheckerConfig:
    epsilon: float
    time_budget: float = 1.0
    feasible_set: FeasibleSet = FeasibleSet.SIMPLEX
    restarts: int = 2
    tolerance: float = 1e-9
    seed: int = 0
    max_iter: int = 300

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")
        if not self.time_budget > 0:
            raise ValueError("time_budget must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        object.__setattr__(self, "feasible_set", FeasibleSet(self.feasible_set))


@dataclass(frozen=True)
class CheckVectors:
    """Condition vectors ``a, b, c`` (length 2m) at timestamp ``t``.

    ``projector`` maps an initial distribution to the lifted initial vector;
    it is ``[I, 0]`` unless the event starts at timestamp 1.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    t: int
    regime: Regime
    projector: np.ndarray

    def projected(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        P = self.projector
        return P @ self.a, P @ self.b, P @ self.c


@dataclass(frozen=True)
class QuadraticCondition:
    """``pi Q pi^T + pi.linear <= 0`` with ``Q = sym(u z^T)`` kept in factored form."""

    u: np.ndarray
    z: np.ndarray
    linear: np.ndarray
    name: str = ""

    @functools.cached_property
    def Q(self) -> np.ndarray:
        outer = np.outer(self.u, self.z)
        return 0.5 * (outer + outer.T)

    @property
    def m(self) -> int:
        return self.u.shape[0]

    def objective(self, pi) -> np.ndarray:
        """Objective at one point or at each row of a stack of points."""
        pi = np.asarray(pi, dtype=float)
        return (pi @ self.u) * (pi @ self.z) + pi @ self.linear

    def objective_dense(self, pi) -> float:
        pi = np.asarray(pi, dtype=float)
        return float(pi @ self.Q @ pi + pi @ self.linear)

    def gradient(self, pi: np.ndarray) -> np.ndarray:
        return self.u * (pi @ self.z) + self.z * (pi @ self.u) + self.linear


def conditions_from_projected(u, v, w, epsilon: float) -> tuple[QuadraticCondition, QuadraticCondition]:
    """Both conditions from the initial-state images ``u = Pa``, ``v = Pb``, ``w = Pc``.

    ``v`` and ``w`` are rescaled jointly so that ``max(w) = 1``; both
    objectives are homogeneous of degree one in ``(v, w)`` so signs are kept.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    scale = np.abs(w).max()
    if scale > 0:
        v = v / scale
        w = w / scale
    ee = math.exp(epsilon)
    em1 = math.expm1(epsilon)
    c1 = QuadraticCondition(u=u, z=em1 * v - ee * w, linear=v, name="event-vs-not")
    c2 = QuadraticCondition(u=u, z=em1 * v + w, linear=-ee * v, name="not-vs-event")
    return c1, c2


def assemble_conditions(vectors: CheckVectors, epsilon: float):
    u, v, w = vectors.projected()
    return conditions_from_projected(u, v, w, epsilon)


# --------------------------------------------------------------------------
# vector construction, literal (non-incremental)


def build_check_vectors(event: Event, M, emissions, regime: Regime | None = None) -> CheckVectors:
    """Condition vectors for observations ``emissions[0..t-1]`` by direct products.

    Every product is evaluated right to left as matrix-vector steps, so the
    cost is ``O(t m^2)``. The incremental path lives in :class:`EventState`.
    """
    M = validate_transition(M)
    E = _as_columns(emissions)
    t = E.shape[0]
    m = event.m
    natural = Regime.AT_OR_BEFORE_END if t <= event.end else Regime.AFTER_END
    if regime is not None and regime is not natural:
        raise ValueError(f"regime {regime.value} requested at t={t}, end={event.end}")
    a = event_vector(event, M)
    ones = np.ones(2 * m)
    if natural is Regime.AT_OR_BEFORE_END:
        tail_b = propagate_to_end(true_world(m), event, M, t)
        tail_c = ones
        last = t
    else:
        beta = ones
        for i in range(t - 1, event.end - 1, -1):
            beta = lifted_step_col(beta * lift_emission(E[i]), transition_at(M, i), event, i)
        tail_b = beta * true_world(m)
        tail_c = beta
        last = event.end
    b, c = tail_b, tail_c
    for i in range(last, 1, -1):
        b = lifted_step_col(b * lift_emission(E[i - 1]), transition_at(M, i - 1), event, i - 1)
        c = lifted_step_col(c * lift_emission(E[i - 1]), transition_at(M, i - 1), event, i - 1)
    b = b * lift_emission(E[0])
    c = c * lift_emission(E[0])
    return CheckVectors(a=a, b=b, c=c, t=t, regime=natural, projector=initial_projector(event))


# --------------------------------------------------------------------------
# incremental state (cached prefix A and suffix B)


class EventState:
    """Per-event cache for the streaming check.

    ``A`` holds ``P0 p_{o1}^D M_1 p_{o2}^D ... M_{t-1} p_{ot}^D`` restricted to
    the rows an initial distribution can reach (``P0`` is the initial
    projector), so it is ``m x 2m``. After the event window only the suffix
    ``B`` changes; lifted steps are block-diagonal with equal blocks there,
    so ``B`` is kept as one ``m x m`` block.
    """

    def __init__(self, event: Event, M):
        self.event = event
        self.M = validate_transition(M)
        m = event.m
        if transition_at(self.M, 1).shape[0] != m:
            raise ValueError("transition matrix and event map differ in size")
        self.m = m
        self.P0 = initial_projector(event)
        g = {event.end: true_world(m)}
        for t in range(event.end - 1, 0, -1):
            g[t] = lifted_step_col(g[t + 1], transition_at(self.M, t), event, t)
        self.g = g
        self.a = g[1]
        self.u = self.P0 @ self.a
        self.A: np.ndarray | None = None
        self.B = np.eye(m)
        self.t = 0

    @property
    def degenerate(self) -> bool:
        """Event impossible (or certain) from every initial state."""
        support = self.P0.sum(axis=1) > 0
        u = self.u[support]
        return bool(np.all(u <= 1e-15) or np.all(u >= 1 - 1e-15))

    def _regime(self, t: int) -> Regime:
        return Regime.AT_OR_BEFORE_END if t <= self.event.end else Regime.AFTER_END

    def projected_vectors(self, column) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(P0 a, P0 b, P0 c)`` for releasing ``column`` at timestamp ``t + 1``; O(m^2)."""
        e = np.asarray(column, dtype=float)
        le = lift_emission(e)
        t = self.t + 1
        ev = self.event
        if t == 1:
            v = self.P0 @ (le * self.g[1])
            w = self.P0 @ le
        elif t <= ev.end:
            Mt = transition_at(self.M, t - 1)
            v = self.A @ lifted_step_col(le * self.g[t], Mt, ev, t - 1)
            w = self.A @ lifted_step_col(le, Mt, ev, t - 1)
        else:
            m = self.m
            beta = self.B.T @ (transition_at(self.M, t - 1) @ e)
            v = self.A[:, m:] @ beta
            w = self.A[:, :m] @ beta + v
        return self.u, v, w

    def conditions(self, column, epsilon: float):
        return conditions_from_projected(*self.projected_vectors(column), epsilon)

    def commit(self, column) -> None:
        """Fold the released observation into ``A`` (during) or ``B`` (after the window)."""
        e = np.asarray(column, dtype=float)
        t = self.t + 1
        ev = self.event
        if t == 1:
            self.A = self.P0 * lift_emission(e)
        elif t <= ev.end:
            A = lifted_step(self.A, transition_at(self.M, t - 1), ev, t - 1) * lift_emission(e)
            self.A = A / _positive_max(A)
        else:
            B = e[:, None] * (transition_at(self.M, t - 1).T @ self.B)
            self.B = B / _positive_max(B)
        self.t = t


def _positive_max(x: np.ndarray) -> float:
    z = float(np.abs(x).max())
    return z if z > 0 else 1.0


# --------------------------------------------------------------------------
# maximization


@dataclass
class ConditionResult:
    name: str
    maximum: float
    argmax: np.ndarray
    converged: bool
    timed_out: bool

    def to_dict(self) -> dict:
        support = np.flatnonzero(self.argmax > 1e-12)
        return {
            "name": self.name,
            "maximum": self.maximum,
            "argmax": {int(i): float(self.argmax[i]) for i in support[:16]},
            "converged": self.converged,
            "timed_out": self.timed_out,
        }


@dataclass
class CheckResult:
    decision: Decision
    conditions: list[ConditionResult] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def holds(self) -> bool:
        return self.decision is Decision.HOLDS

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "elapsed": self.elapsed,
            "conditions": [c.to_dict() for c in self.conditions],
        }


class _Deadline:
    def __init__(self, budget: float):
        self.stop = time.perf_counter() + budget

    def expired(self) -> bool:
        return time.perf_counter() > self.stop


@functools.lru_cache(maxsize=8)
def _pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(m, k=1)


def _point(m: int, idx, weights) -> np.ndarray:
    pi = np.zeros(m)
    np.add.at(pi, np.asarray(idx), np.asarray(weights, dtype=float))
    return pi


def _scan_edges(a, z, lv, i, j):
    """Closed-form maximum of the objective on segments between vertices i and j."""
    da = a[j] - a[i]
    dz = z[j] - z[i]
    dv = lv[j] - lv[i]
    quad = da * dz
    lin = a[i] * dz + z[i] * da + dv
    lam = np.zeros_like(quad)
    concave = quad < 0
    lam[concave] = np.clip(-lin[concave] / (2 * quad[concave]), 0.0, 1.0)
    val = a[i] * z[i] + lv[i] + lam * (lin + lam * quad)
    k = int(np.argmax(val)) if val.size else -1
    return val, lam, k


def _scan_triangles(a, z, lv, tri):
    """Interior critical points of the objective on triangles of image points."""
    i0, i1, i2 = tri[:, 0], tri[:, 1], tri[:, 2]
    a0, z0, v0 = a[i0], z[i0], lv[i0]
    da1, da2 = a[i1] - a0, a[i2] - a0
    dz1, dz2 = z[i1] - z0, z[i2] - z0
    dv1, dv2 = lv[i1] - v0, lv[i2] - v0
    g1 = a0 * dz1 + z0 * da1 + dv1
    g2 = a0 * dz2 + z0 * da2 + dv2
    h11 = 2 * da1 * dz1
    h22 = 2 * da2 * dz2
    h12 = da1 * dz2 + da2 * dz1
    det = h11 * h22 - h12 * h12
    ok = np.abs(det) > 1e-300
    s = np.zeros_like(det)
    t = np.zeros_like(det)
    s[ok] = (-g1[ok] * h22[ok] + g2[ok] * h12[ok]) / det[ok]
    t[ok] = (-g2[ok] * h11[ok] + g1[ok] * h12[ok]) / det[ok]
    ok &= (s >= 0) & (t >= 0) & (s + t <= 1)
    val = np.full(det.shape, -np.inf)
    base = a0 * z0 + v0
    val[ok] = (base + s * g1 + t * g2 + 0.5 * (h11 * s * s + h22 * t * t) + h12 * s * t)[ok]
    return val, s, t


def _hull_triangles(points: np.ndarray) -> np.ndarray:
    """Triangulated boundary of the convex hull of 3-D points (index triples)."""
    if points.shape[0] < 4:
        return np.array([[0, 1, 2]]) if points.shape[0] == 3 else np.empty((0, 3), int)
    centered = points - points.mean(axis=0)
    scale = np.abs(centered).max(axis=0)
    scale[scale == 0] = 1.0
    centered = centered / scale
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300)))
    try:
        if rank >= 3:
            return ConvexHull(centered, qhull_options="Qt").simplices
        if rank == 2:
            flat = centered @ vt[:2].T
            verts = ConvexHull(flat).vertices
            return np.array([[verts[0], verts[k], verts[k + 1]] for k in range(1, len(verts) - 1)],
                            dtype=int).reshape(-1, 3)
    except QhullError:
        return ConvexHull(centered, qhull_options="QJ Qt").simplices if rank >= 3 else np.empty((0, 3), int)
    return np.empty((0, 3), int)


def exact_simplex_maximum(cond: QuadraticCondition) -> tuple[float, np.ndarray]:
    """Global maximum of the objective over the probability simplex."""
    a, z, lv = cond.u, cond.z, cond.linear
    m = cond.m
    vert = a * z + lv
    k = int(np.argmax(vert))
    best, best_pi = float(vert[k]), _point(m, [k], [1.0])
    if m == 1:
        return best, best_pi
    points = np.column_stack([a, z, lv])
    tri = _hull_triangles(points)
    if tri.size:
        # every edge of the hull is an edge of some boundary triangle
        e = np.unique(np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [0, 2]]]), axis=1), axis=0)
        i, j = e[:, 0], e[:, 1]
    else:
        # collinear image: the hull is a segment, scan every pair
        i, j = _pairs(m)
    val, lam, k = _scan_edges(a, z, lv, i, j)
    if k >= 0 and val[k] > best:
        best, best_pi = float(val[k]), _point(m, [i[k], j[k]], [1 - lam[k], lam[k]])
    if tri.size:
        val, s, t = _scan_triangles(a, z, lv, tri)
        k = int(np.argmax(val))
        if val[k] > best:
            best = float(val[k])
            best_pi = _point(m, tri[k], [1 - s[k] - t[k], s[k], t[k]])
    return best, best_pi


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = y.shape[0]
    srt = np.sort(y)[::-1]
    css = np.cumsum(srt) - 1.0
    rho = np.nonzero(srt - css / np.arange(1, n + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def _project(y, feasible: FeasibleSet):
    if feasible is FeasibleSet.SIMPLEX:
        return project_simplex(y)
    return np.clip(y, 0.0, 1.0)


def projected_ascent(cond: QuadraticCondition, start: np.ndarray, feasible: FeasibleSet,
                     deadline: _Deadline, max_iter: int = 300, tol: float = 1e-13):
    """Projected gradient ascent with backtracking. Returns (value, point, converged, timed_out)."""
    x = _project(start, feasible)
    fx = float(cond.objective(x))
    step = 1.0
    for _ in range(max_iter):
        if deadline.expired():
            return fx, x, False, True
        g = cond.gradient(x)
        while True:
            y = _project(x + step * g, feasible)
            fy = float(cond.objective(y))
            d = y - x
            # sufficient-increase test for the projected step
            if fy >= fx + 1e-4 * float(g @ d) or step < 1e-12:
                break
            step *= 0.5
        if np.abs(d).sum() <= tol or fy - fx <= tol * max(1.0, abs(fx)):
            if fy > fx:
                x, fx = y, fy
            return fx, x, True, False
        x, fx = y, fy
        step = min(step * 2.0, 1e6)
    return fx, x, False, False


def _maximize(cond: QuadraticCondition, config: CheckerConfig, deadline: _Deadline) -> ConditionResult:
    m = cond.m
    best, best_pi = exact_simplex_maximum(cond)
    if deadline.expired():
        return ConditionResult(cond.name, best, best_pi, False, True)
    feasible = config.feasible_set
    starts = [best_pi]
    if feasible is FeasibleSet.BOX:
        starts += [np.ones(m), np.clip(best_pi * m, 0, 1)]
    rng = np.random.default_rng([config.seed, m])
    for _ in range(config.restarts):
        if feasible is FeasibleSet.SIMPLEX:
            starts.append(rng.dirichlet(np.ones(m)))
        else:
            starts.append(rng.random(m))
    converged = True
    for s in starts:
        val, pi, conv, timed_out = projected_ascent(cond, s, feasible, deadline, config.max_iter)
        if val > best:
            best, best_pi = val, pi
        if timed_out:
            return ConditionResult(cond.name, best, best_pi, False, True)
        converged &= conv
    return ConditionResult(cond.name, best, best_pi, converged, False)


def check_privacy(conditions: Sequence[QuadraticCondition], config: CheckerConfig) -> CheckResult:
    """Decide whether every condition's maximum over the feasible set is <= tolerance.

    VIOLATED as soon as any evaluated point exceeds the tolerance; UNKNOWN if
    the time budget runs out first. The exact scan certifies the maximum;
    ascent only searches for points the scan might have missed, so an
    unconverged ascent run does not weaken the certificate.
    """
    t0 = time.perf_counter()
    deadline = _Deadline(config.time_budget)
    results = []
    decision = Decision.HOLDS
    for cond in conditions:
        if deadline.expired():
            decision = Decision.UNKNOWN
            break
        res = _maximize(cond, config, deadline)
        results.append(res)
        if res.maximum > config.tolerance:
            decision = Decision.VIOLATED
            break
        if res.timed_out:
            decision = Decision.UNKNOWN
    if decision is Decision.HOLDS and deadline.expired():
        decision = Decision.UNKNOWN
    return CheckResult(decision, results, time.perf_counter() - t0)


def check_all_events(states: Sequence[EventState], column, config: CheckerConfig) -> CheckResult:
    """Conjunction of per-event checks for one shared candidate observation."""
    t0 = time.perf_counter()
    combined = CheckResult(Decision.HOLDS)
    for state in states:
        if state.degenerate:
            raise DegenerateEventError(f"event {state.event.name or state.event} is degenerate")
        res = check_privacy(state.conditions(column, config.epsilon), config)
        combined.conditions.extend(res.conditions)
        if res.decision is Decision.VIOLATED:
            combined.decision = Decision.VIOLATED
            break
        if res.decision is Decision.UNKNOWN:
            combined.decision = Decision.UNKNOWN
    combined.elapsed = time.perf_counter() - t0
    return combined
