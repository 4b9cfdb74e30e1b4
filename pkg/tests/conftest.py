import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from priste.events import Event, EventKind, Region

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Three-cell chain of the worked prior example
EXAMPLE_M = np.array([[0.1, 0.2, 0.7],
                      [0.4, 0.1, 0.5],
                      [0.0, 0.1, 0.9]])
EXAMPLE_EVENT = Event.from_cells("presence", [[0, 1], [0, 1]], [3, 4], 3)
EXAMPLE_PRIOR_VECTOR = np.array([0.28, 0.298, 0.226])


def random_instance(rng, m_max=4, t_max=6, m_min=2, kind=None):
    """Random (pi, M, event, emission columns) small enough for enumeration."""
    m = int(rng.integers(m_min, m_max + 1))
    T = int(rng.integers(1, t_max + 1))
    M = rng.dirichlet(np.ones(m) * rng.choice([0.3, 1.0, 3.0]), size=m)
    pi = rng.dirichlet(np.ones(m))
    start = int(rng.integers(1, T + 1))
    end = int(rng.integers(start, T + 1))
    kind = kind or (EventKind.PRESENCE if rng.random() < 0.5 else EventKind.PATTERN)
    regions = tuple(Region.from_cells(rng.choice(m, size=int(rng.integers(1, m + 1)), replace=False), m)
                    for _ in range(end - start + 1))
    event = Event(kind, regions, tuple(range(start, end + 1)))
    E = rng.dirichlet(np.ones(m), size=m)
    cols = E[:, rng.integers(m, size=T)].T
    return pi, M, event, cols


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abcd")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
