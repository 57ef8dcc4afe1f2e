import numpy as np
import pytest

from lmpgnn.graph import Graph, gft_basis, laplacian

ACCEPTANCE_LINES = []


def random_connected_graph(n, seed, density=0.5):
    """Erdos-Renyi graph with uniform weights plus a random spanning path."""
    rng = np.random.default_rng(seed)
    a = np.triu((rng.random((n, n)) < density) * rng.uniform(0.1, 2.0, (n, n)), 1)
    order = rng.permutation(n)
    for i, j in zip(order[:-1], order[1:]):
        a[min(i, j), max(i, j)] = rng.uniform(0.1, 2.0)
    return Graph(a + a.T)


@pytest.fixture
def graph5():
    return random_connected_graph(5, seed=7)


@pytest.fixture
def basis5(graph5):
    return gft_basis(laplacian(graph5))


@pytest.fixture
def graph10():
    return random_connected_graph(10, seed=3)


@pytest.fixture
def basis10(graph10):
    return gft_basis(laplacian(graph10))


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
