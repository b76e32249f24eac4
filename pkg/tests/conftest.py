import itertools

import pytest

from agsgr.graph import CheckIn, GeoSocialNetwork, Poi

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def clique(nodes):
    return list(itertools.combinations(nodes, 2))


def make_graph(edges, users=()):
    return GeoSocialNetwork.from_edges(edges, users=users)


@pytest.fixture
def triangle():
    return make_graph([(1, 2), (2, 3), (3, 1)])


@pytest.fixture
def k5():
    return make_graph(clique(range(1, 6)))


@pytest.fixture
def small_network():
    """Two friend cliques sharing user 1, with POIs of two topics."""
    edges = clique([1, 2, 3, 4]) + clique([1, 5, 6, 7])
    pois = {
        "a1": Poi("a1", 40.000, -74.000, "A"),
        "a2": Poi("a2", 40.010, -74.010, "A"),
        "b1": Poi("b1", 40.020, -74.000, "B"),
        "b2": Poi("b2", 40.030, -74.020, "B"),
    }
    checkins = []
    t = 1_000_000
    for u in (1, 2, 3, 4):
        checkins += [CheckIn(u, "a1", t), CheckIn(u, "a2", t + 100 + u)]
    for u in (5, 6, 7):
        checkins += [CheckIn(u, "b1", t + 5000), CheckIn(u, "b2", t + 9000 + u)]
    checkins.append(CheckIn(1, "b1", t + 5010))
    return GeoSocialNetwork.from_edges(edges, pois=pois, checkins=checkins)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
