import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gcica.graph import build_graph

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return build_graph([(0, 1, 1.0), (1, 2, 1.0)], n_nodes=3)


def random_graph(rng, n, p=0.4, connected=True):
    w = np.triu(rng.uniform(0.1, 1.0, (n, n)) * (rng.random((n, n)) < p), 1)
    if connected:
        for i in range(1, n):
            j = rng.integers(0, i)
            w[j, i] = w[j, i] or rng.uniform(0.1, 1.0)
    return build_graph(w + w.T)


def random_pd(rng, n, jitter=0.5):
    b = rng.standard_normal((n, n))
    return b @ b.T / n + jitter * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
