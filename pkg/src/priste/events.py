"""Grid maps, regions and the two spatiotemporal event kinds (PRESENCE, PATTERN).

Timestamps are 1-based everywhere in the public interface: ``times=[3, 4]``
means the third and fourth released locations. Cell indices are 0-based.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class EventError(ValueError):
    """Invalid event definition or evaluation input."""


class MissingTimestampError(EventError):
    pass


@dataclass(frozen=True)
class GridMap:
    """A ``width x height`` grid of square cells, ``cell_size`` km per edge.

    Cell ``i`` sits at row ``i // width`` and column ``i % width``.
    """

    width: int
    height: int
    cell_size: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")

    @property
    def m(self) -> int:
        return self.width * self.height

    def cell_to_rc(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.m:
            raise IndexError(f"cell {i} outside map of {self.m} cells")
        return divmod(int(i), self.width)

    def rc_to_cell(self, row: int, col: int) -> int:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"({row}, {col}) outside {self.height}x{self.width} grid")
        return row * self.width + col

    def centers(self) -> np.ndarray:
        """(m, 2) array of cell-center coordinates in km as (x, y)."""
        idx = np.arange(self.m)
        rows, cols = np.divmod(idx, self.width)
        return np.column_stack([(cols + 0.5) * self.cell_size, (rows + 0.5) * self.cell_size])

    def distances(self) -> np.ndarray:
        """(m, m) Euclidean distances between cell centers, km."""
        c = self.centers()
        diff = c[:, None, :] - c[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    def distance(self, i: int, j: int) -> float:
        ri, ci = self.cell_to_rc(i)
        rj, cj = self.cell_to_rc(j)
        return self.cell_size * math.hypot(ri - rj, ci - cj)


@dataclass(frozen=True, eq=False)
class Region:
    """Indicator vector over the cells of a map."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 1:
            raise EventError("region mask must be one-dimensional")
        mask = mask.astype(bool)
        if not mask.any():
            raise EventError("empty region")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_cells(cls, cells: Iterable[int], m: int) -> "Region":
        mask = np.zeros(m, dtype=bool)
        for c in cells:
            c = int(c)
            if not 0 <= c < m:
                raise EventError(f"cell {c} outside map of {m} cells")
            mask[c] = True
        return cls(mask)

    @property
    def m(self) -> int:
        return self.mask.shape[0]

    @property
    def cells(self) -> list[int]:
        return np.flatnonzero(self.mask).tolist()

    def as_float(self) -> np.ndarray:
        return self.mask.astype(float)

    def __contains__(self, cell) -> bool:
        return bool(self.mask[int(cell)])

    def __eq__(self, other):
        return isinstance(other, Region) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.mask.tobytes())

    def __repr__(self):
        return f"Region(cells={self.cells}, m={self.m})"


class EventKind(enum.Enum):
    PRESENCE = "presence"
    PATTERN = "pattern"


@dataclass(frozen=True)
class Event:
    """A PRESENCE or PATTERN event over consecutive 1-based timestamps.

    PRESENCE holds when the user is in ``regions[k]`` at ``times[k]`` for at
    least one ``k``; PATTERN holds when that is true for every ``k``.
    """

    kind: EventKind
    regions: tuple[Region, ...]
    times: tuple[int, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        kind = EventKind(self.kind) if not isinstance(self.kind, EventKind) else self.kind
        object.__setattr__(self, "kind", kind)
        regions = tuple(r if isinstance(r, Region) else Region(r) for r in self.regions)
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "times", times)
        if len(regions) == 0 or len(regions) != len(times):
            raise EventError("regions and times must be non-empty and of equal length")
        if times[0] < 1:
            raise EventError("timestamps are 1-based; start must be >= 1")
        # Non-consecutive windows are not supported by the lifted transitions.
        if any(b - a != 1 for a, b in zip(times, times[1:])):
            raise EventError(f"event times must be consecutive and increasing, got {list(times)}")
        ms = {r.m for r in regions}
        if len(ms) != 1:
            raise EventError("all regions must be defined on the same map")

    @classmethod
    def presence(cls, regions, times, name: str = "") -> "Event":
        return cls(EventKind.PRESENCE, tuple(regions), tuple(times), name)

    @classmethod
    def pattern(cls, regions, times, name: str = "") -> "Event":
        return cls(EventKind.PATTERN, tuple(regions), tuple(times), name)

    @classmethod
    def from_cells(cls, kind, cells: Sequence[Sequence[int]], times: Sequence[int], m: int,
                   name: str = "") -> "Event":
        return cls(EventKind(kind), tuple(Region.from_cells(c, m) for c in cells), tuple(times), name)

    @property
    def m(self) -> int:
        return self.regions[0].m

    @property
    def start(self) -> int:
        return self.times[0]

    @property
    def end(self) -> int:
        return self.times[-1]

    @property
    def length(self) -> int:
        return len(self.times)

    def region_at(self, t: int) -> Region:
        """Region active at timestamp ``t`` (must lie in the window)."""
        if not self.start <= t <= self.end:
            raise EventError(f"t={t} outside event window [{self.start}, {self.end}]")
        return self.regions[t - self.start]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "times": list(self.times),
            "regions": [r.cells for r in self.regions],
            **({"name": self.name} if self.name else {}),
        }


def evaluate_event(event: Event, trajectory: Sequence[int]) -> bool:
    """Truth value of ``event`` on a trajectory; ``trajectory[0]`` is timestamp 1."""
    if len(trajectory) < event.end:
        raise MissingTimestampError(
            f"trajectory covers {len(trajectory)} timestamps, event needs {event.end}")
    hits = []
    for region, t in zip(event.regions, event.times):
        cell = int(trajectory[t - 1])
        if not 0 <= cell < event.m:
            raise EventError(f"cell {cell} outside map of {event.m} cells")
        hits.append(bool(region.mask[cell]))
    return any(hits) if event.kind is EventKind.PRESENCE else all(hits)


def event_to_boolean_expression(event: Event) -> str:
    """Render the event as a formula over ``(l_t=s_i)`` predicates, cells 1-based."""
    clauses = []
    for region, t in zip(event.regions, event.times):
        clauses.append([f"(l{t}=s{c + 1})" for c in region.cells])
    if event.kind is EventKind.PRESENCE:
        return "∨".join(lit for clause in clauses for lit in clause)
    if len(clauses) == 1:
        return "∨".join(clauses[0])
    return "∧".join(clause[0] if len(clause) == 1 else "(" + "∨".join(clause) + ")"
                    for clause in clauses)


def events_from_json(data, m: int) -> list[Event]:
    """Parse one event object, a list of them, or ``{"events": [...]}``."""
    if isinstance(data, dict) and "events" in data:
        data = data["events"]
    if isinstance(data, dict):
        data = [data]
    events = []
    for i, item in enumerate(data):
        try:
            kind = item["kind"].lower()
            events.append(Event.from_cells(kind, item["regions"], item["times"], m,
                                           name=item.get("name", f"event{i}")))
        except KeyError as exc:
            raise EventError(f"event #{i}: missing field {exc}") from None
    return events


def load_events(path, m: int) -> list[Event]:
    return events_from_json(json.loads(Path(path).read_text()), m)


def save_events(events: Sequence[Event], path) -> None:
    Path(path).write_text(json.dumps({"events": [e.to_dict() for e in events]}, indent=2))
