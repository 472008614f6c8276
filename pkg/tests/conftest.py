import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_kraus(d, r, seed):
    from nisqspec import numerics as nx

    q, _ = nx.qr_positive(nx.ginibre(r * d, d, seed))
    return q.reshape(r, d, d)


def random_density(d, seed):
    from nisqspec import numerics as nx

    g = nx.ginibre(d, d, seed)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# acceptance results, printed again at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
