"""Synthetic maps, Gaussian-kernel mobility, trajectory sampling and CSV ingestion."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .events import GridMap
from .lppm import sample_row
from .markov import transition_at, validate_transition

log = logging.getLogger(__name__)

SMOOTHING = 1e-6


@dataclass(frozen=True)
class SyntheticConfig:
    width: int = 20
    height: int = 20
    sigma: float = 1.0
    horizon: int = 50
    seed: int = 0
    cell_size: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def grid(self) -> GridMap:
        return GridMap(self.width, self.height, self.cell_size)


def gaussian_transition(grid: GridMap, sigma: float) -> np.ndarray:
    """Rows proportional to ``exp(-d^2 / (2 sigma^2))`` over cell-center distances."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    D = grid.distances()
    logits = -(D**2) / (2.0 * sigma**2)
    # subtract the row max (the self distance, 0) so tiny sigma does not underflow
    K = np.exp(logits - logits.max(axis=1, keepdims=True))
    return K / K.sum(axis=1, keepdims=True)


def generate_transition(config: SyntheticConfig) -> np.ndarray:
    return gaussian_transition(config.grid, config.sigma)


def generate_trajectory(M, pi, T: int, seed=None) -> np.ndarray:
    """Sample ``x_1 ~ pi`` and ``x_{t+1} ~ M_t[x_t]``; returns T cell indices."""
    M = validate_transition(M)
    pi = np.asarray(pi, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = np.empty(T, dtype=int)
    u = rng.random(T)
    out[0] = sample_row(pi, u[0])
    for t in range(1, T):
        out[t] = sample_row(transition_at(M, t)[out[t - 1]], u[t])
    return out


def estimate_transition(traces: Sequence[Sequence[int]], m: int | None = None) -> np.ndarray:
    """Maximum-likelihood bigram estimate.

    Rows that miss some successor get ``SMOOTHING`` added to every entry
    before renormalizing; rows never left get the smoothing only (uniform).
    """
    traces = [np.asarray(tr, dtype=int) for tr in traces if len(tr) > 0]
    if not traces:
        raise ValueError("no traces to estimate from")
    if m is None:
        m = int(max(tr.max() for tr in traces)) + 1
    counts = np.zeros((m, m))
    for tr in traces:
        if tr.min() < 0 or tr.max() >= m:
            raise ValueError(f"trace contains cells outside [0, {m})")
        np.add.at(counts, (tr[:-1], tr[1:]), 1.0)
    incomplete = (counts == 0).any(axis=1)
    counts[incomplete] += SMOOTHING
    return counts / counts.sum(axis=1, keepdims=True)


# --------------------------------------------------------------------------
# CSV ingestion


class TrajectoryParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class BoundingBox:
    """Geographic extent mapped onto a grid; row 0 is the southern edge."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_max > self.lat_min and self.lon_max > self.lon_min):
            raise ValueError("bounding box must have positive extent")

    def cell_center(self, grid: GridMap, cell: int) -> tuple[float, float]:
        r, c = grid.cell_to_rc(cell)
        dlat = (self.lat_max - self.lat_min) / grid.height
        dlon = (self.lon_max - self.lon_min) / grid.width
        return self.lat_min + (r + 0.5) * dlat, self.lon_min + (c + 0.5) * dlon


@dataclass
class TrajectoryFile:
    times: np.ndarray
    cells: np.ndarray
    clamped: int = 0
    source: str = field(default="", compare=False)


def snap(lat: float, lon: float, grid: GridMap, box: BoundingBox) -> tuple[int, bool]:
    """Cell containing ``(lat, lon)``, and whether the fix had to be clamped."""
    fr = (lat - box.lat_min) / (box.lat_max - box.lat_min) * grid.height
    fc = (lon - box.lon_min) / (box.lon_max - box.lon_min) * grid.width
    outside = not (0 <= fr <= grid.height and 0 <= fc <= grid.width)
    r = min(max(int(math.floor(fr)), 0), grid.height - 1)
    c = min(max(int(math.floor(fc)), 0), grid.width - 1)
    return grid.rc_to_cell(r, c), outside


def ingest_csv(path, grid: GridMap, box: BoundingBox | None = None) -> TrajectoryFile:
    """Read ``t,lat,lon`` or ``t,cell`` rows (header optional) into cell indices."""
    path = Path(path)
    times, cells = [], []
    clamped = 0
    fmt = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [x.strip() for x in row]
            if not row or all(x == "" for x in row) or row[0].startswith("#"):
                continue
            if fmt is None and not _is_number(row[0]):
                header = [x.lower() for x in row]
                if header == ["t", "cell"]:
                    fmt = "cell"
                elif header == ["t", "lat", "lon"]:
                    fmt = "latlon"
                else:
                    raise TrajectoryParseError(lineno, f"unrecognized header {row}")
                continue
            if fmt is None:
                fmt = {2: "cell", 3: "latlon"}.get(len(row))
                if fmt is None:
                    raise TrajectoryParseError(lineno, f"expected 2 or 3 columns, got {len(row)}")
            try:
                if fmt == "cell":
                    if len(row) != 2:
                        raise ValueError(f"expected 2 columns, got {len(row)}")
                    t, cell = float(row[0]), int(row[1])
                    if not 0 <= cell < grid.m:
                        raise ValueError(f"cell {cell} outside map of {grid.m} cells")
                else:
                    if len(row) != 3:
                        raise ValueError(f"expected 3 columns, got {len(row)}")
                    if box is None:
                        raise ValueError("lat/lon rows need a bounding box")
                    t, lat, lon = float(row[0]), float(row[1]), float(row[2])
                    if not (math.isfinite(lat) and math.isfinite(lon)):
                        raise ValueError("non-finite coordinate")
                    cell, out = snap(lat, lon, grid, box)
                    clamped += out
            except ValueError as exc:
                raise TrajectoryParseError(lineno, str(exc)) from None
            if times and not t > times[-1]:
                raise TrajectoryParseError(lineno, f"timestamp {row[0]} not strictly increasing")
            times.append(t)
            cells.append(cell)
    if clamped:
        log.warning("%s: %d fixes outside the bounding box were clamped", path, clamped)
    return TrajectoryFile(np.asarray(times), np.asarray(cells, dtype=int), clamped, str(path))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_cell_csv(path, cells: Sequence[int], times: Sequence[float] | None = None) -> None:
    times = range(1, len(cells) + 1) if times is None else times
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cell"])
        for t, c in zip(times, cells):
            w.writerow([t if not float(t).is_integer() else int(t), int(c)])
