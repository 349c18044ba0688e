import numpy as np
import pytest

from cps5jd.tensor_core import FactorSet


def cn(rng, *shape):
    """Standard complex normal array."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_factorset(rng, I=6, J=6, K=6, R=5):
    return FactorSet(cn(rng, I, R), cn(rng, J, R), rng.standard_normal((K, R)))


def column_angle(x, y):
    """Sine of the angle between complex vectors, blind to a complex scale.

    Computed from the projection residual, which stays accurate near zero
    where ``arccos`` of the cosine does not.
    """
    x = x / np.linalg.norm(x)
    y = y / np.linalg.norm(y)
    return float(np.linalg.norm(y - x * np.vdot(x, y)))


def match_columns(est, truth):
    """Permutation sending each truth column to its closest estimate."""
    from scipy.optimize import linear_sum_assignment

    e = est / np.linalg.norm(est, axis=0)
    t = truth / np.linalg.norm(truth, axis=0)
    cost = -np.abs(e.conj().T @ t)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(truth.shape[1], dtype=int)
    perm[cols] = rows
    return perm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
