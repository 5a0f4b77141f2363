import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, d, scale=1.0):
    """A well-conditioned random symmetric positive-definite matrix."""
    G = rng.normal(size=(d, d))
    return scale * (G @ G.T + d * np.eye(d))


def make_regression_data(seed, n=50, d=3, sigma=0.7):
    """Gaussian linear-regression data with a fixed coefficient vector."""
    r = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), r.normal(size=(n, d - 1))])
    beta = r.normal(scale=2.0, size=d)
    y = X @ beta + r.normal(scale=sigma, size=n)
    return y, X


@pytest.fixture
def regression_data():
    return make_regression_data(7)
