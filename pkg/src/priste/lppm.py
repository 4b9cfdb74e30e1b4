"""Location perturbation mechanisms as emission matrices.

``E[i, j] = Pr(output j | true cell i)``; a released cell ``o`` contributes
the emission column ``E[:, o]`` to the check.

The planar Laplace mechanism is discretized on cell centers:
``E[i, j] ~ exp(-k d(i, j))`` with rows normalized. Row normalization alone
does not keep the geo-indistinguishability bound ``E[i, z] <= e^{alpha
d(i, i')} E[i', z]`` on maps where cells have different neighbourhoods, so
the rate ``k`` is the largest value in ``[alpha/2, alpha]`` for which the
bound holds exactly. Only the pair ``z = i`` can be tight, which reduces the
test to ``(alpha - k) d(i, i') >= log Z_i'(k) - log Z_i(k)``; ``k = alpha/2``
always passes. On maps where every row sees the same distances (two cells,
for instance) ``k = alpha``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .events import GridMap
from .markov import InconsistentObservationError

# float tolerance on the log-ratio test; far below any output probability gap
_SLACK = 1e-14


@functools.lru_cache(maxsize=16)
def _distances(grid: GridMap) -> np.ndarray:
    D = grid.distances()
    D.setflags(write=False)
    return D


@functools.lru_cache(maxsize=256)
def calibrated_rate(alpha: float, grid: GridMap) -> float:
    """Largest kernel rate in ``[alpha/2, alpha]`` keeping exact alpha-geo-indistinguishability."""
    D = _distances(grid)
    if _strict_ok(alpha, alpha, D):
        return alpha
    lo, hi = alpha / 2, alpha
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _strict_ok(mid, alpha, D):
            lo = mid
        else:
            hi = mid
    return lo


def _strict_ok(rate: float, alpha: float, D: np.ndarray) -> bool:
    logZ = logsumexp(-rate * D, axis=1)
    gap = logZ[None, :] - logZ[:, None]
    np.fill_diagonal(gap, 0.0)
    return bool(np.all(gap <= (alpha - rate) * D + _SLACK))


@functools.lru_cache(maxsize=256)
def _plm_cached(alpha: float, grid: GridMap) -> np.ndarray:
    D = _distances(grid)
    rate = calibrated_rate(alpha, grid)
    logits = -rate * D
    E = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    E.setflags(write=False)
    return E


def plm_emission_matrix(alpha: float, grid: GridMap) -> np.ndarray:
    """``m x m`` discretized planar Laplace emission matrix (rows sum to 1)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive; use uniform_emission_matrix for alpha = 0")
    return _plm_cached(float(alpha), grid)


def uniform_emission_matrix(m: int) -> np.ndarray:
    return np.full((m, m), 1.0 / m)


def geo_indistinguishability_violation(E: np.ndarray, alpha: float, grid: GridMap) -> float:
    """Largest ``E[x, z] / (e^{alpha d(x, x')} E[x', z])`` over all triples (<= 1 when it holds)."""
    D = _distances(grid)
    worst = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for x in range(E.shape[0]):
            bound = np.exp(alpha * D[x])[:, None] * E
            ratio = np.where(bound > 0, E[x][None, :] / bound, np.where(E[x][None, :] > 0, np.inf, 0.0))
            worst = max(worst, float(ratio.max()))
    return worst


@dataclass(frozen=True)
class PlanarLaplace:
    alpha: float
    grid: GridMap

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def emission(self) -> np.ndarray:
        return plm_emission_matrix(self.alpha, self.grid)

    def sample(self, true_cell: int, rng: np.random.Generator) -> int:
        return plm_sample(self.emission, true_cell, rng)


def plm_sample(emission: np.ndarray, true_cell: int, rng: np.random.Generator) -> int:
    """Draw an output cell from the true cell's emission row."""
    return sample_row(emission[int(true_cell)], rng.random())


def sample_row(row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from a probability row with a uniform ``u`` in [0, 1)."""
    cdf = np.cumsum(row)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), row.shape[0] - 1))


@dataclass(frozen=True)
class DeltaLocationSet:
    delta: float
    active: np.ndarray = field(repr=False)

    @property
    def cells(self) -> list[int]:
        return np.flatnonzero(self.active).tolist()

    @property
    def size(self) -> int:
        return int(self.active.sum())


def compute_delta_set(p_minus, delta: float) -> DeltaLocationSet:
    """Smallest set of cells whose prior mass is at least ``1 - delta``.

    Cells are taken by decreasing probability, ties by ascending index. With
    ``delta = 0`` every cell of positive probability is included.
    """
    p = np.asarray(p_minus, dtype=float)
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    order = np.lexsort((np.arange(p.size), -p))
    csum = np.cumsum(p[order])
    need = 1.0 - delta
    if delta == 0:
        k = int(np.count_nonzero(p > 0))
    else:
        k = int(np.searchsorted(csum, need - 1e-12, side="left")) + 1
    k = max(1, min(k, p.size))
    active = np.zeros(p.size, dtype=bool)
    active[order[:k]] = True
    return DeltaLocationSet(delta, active)


def restricted_plm_emission(alpha: float, grid: GridMap, delta_set: DeltaLocationSet) -> np.ndarray:
    """PLM rows renormalized over the active outputs; ``alpha = 0`` gives uniform-on-set."""
    if delta_set.size == 0:
        raise ValueError("empty delta-location set")
    base = plm_emission_matrix(alpha, grid) if alpha > 0 else uniform_emission_matrix(grid.m)
    E = base * delta_set.active[None, :]
    return E / E.sum(axis=1, keepdims=True)


def posterior_update(p_minus, column) -> np.ndarray:
    """Bayes update of the location prior given one released observation's column."""
    p = np.asarray(p_minus, dtype=float) * np.asarray(column, dtype=float)
    z = p.sum()
    if not z > 0:
        raise InconsistentObservationError("released observation has zero probability under the prior")
    return p / z


@dataclass
class PosteriorState:
    """Location belief carried between releases of the delta-location-set loop."""

    M: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray | None = None

    def predict(self) -> np.ndarray:
        self.p_minus = self.p_plus @ self.M
        return self.p_minus

    def update(self, column) -> np.ndarray:
        self.p_plus = posterior_update(self.p_minus, column)
        return self.p_plus
