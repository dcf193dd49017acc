import itertools

import numpy as np
import pytest

from fxlab import graph


def random_undirected(n, seed):
    """Connected undirected graph on n nodes with a random edge count."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
    return graph.random_connected(n, m, int(rng.integers(1 << 30)))


def random_digraph(n, seed, weighted=True):
    rng = np.random.default_rng(seed)
    return graph.random_strong_digraph(n, float(rng.uniform(0.1, 0.6)),
                                       int(rng.integers(1 << 30)), weighted=weighted)


def mixed_graphs(count, n_lo, n_hi, seed):
    """Alternate undirected and (weighted or uniform) directed graphs."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(n_lo, n_hi + 1))
        s = int(rng.integers(1 << 30))
        if i % 2 == 0:
            out.append(random_undirected(n, s))
        else:
            out.append(random_digraph(n, s, weighted=bool(i % 4 == 1)))
    return out


def subsets(n, size):
    return [frozenset(c) for c in itertools.combinations(range(n), size)]


def is_vertex_cover(g, s):
    return all(u in s or v in s for u, v in g.undirected_edges())


@pytest.fixture
def k2():
    return graph.complete(2)


@pytest.fixture
def k4():
    return graph.complete(4)


@pytest.fixture
def star4():
    return graph.star(4)


# acceptance lines collected by tests/test_acceptance.py and echoed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
