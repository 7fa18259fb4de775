import itertools

import numpy as np
import pytest

from activeggm.graph import Graph

# 0-indexed versions of the six-vertex example used in several tests
# (vertices 1..6 become 0..5).
SIX_TRUE = Graph.from_edges(6, [(0, 1), (0, 3), (1, 2), (2, 3), (2, 4), (4, 5)])
SIX_HPLUS = Graph.from_edges(6, [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 5)])
SIX_HMINUS = Graph.from_edges(6, [(0, 1), (1, 2), (2, 4), (4, 5)])


def random_graph(rng, p, prob):
    edges = [(i, j) for i, j in itertools.combinations(range(p), 2) if rng.random() < prob]
    return Graph.from_edges(p, edges)


def path_graph(p):
    return Graph.from_edges(p, [(i, i + 1) for i in range(p - 1)])


def cycle_graph(p):
    return Graph.from_edges(p, [(i, (i + 1) % p) for i in range(p)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
