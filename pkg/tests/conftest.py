import numpy as np
import pytest

from aftsdar.survival_data import StandardizedDesign


def make_design(Xbar, Ybar):
    """Wrap an already-normalized design without any weighting."""
    Xbar = np.asfortranarray(np.asarray(Xbar, dtype=float))
    n, p = Xbar.shape
    return StandardizedDesign(
        Xbar=Xbar,
        Ybar=np.asarray(Ybar, dtype=float),
        d_scale=np.ones(p),
        dropped_columns=[],
        retained=np.arange(p),
        p_total=p,
        weights=np.full(n, 1.0 / n),
    )


def normalize_columns(X):
    X = np.asarray(X, dtype=float)
    return X * (np.sqrt(X.shape[0]) / np.linalg.norm(X, axis=0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
