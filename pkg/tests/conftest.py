import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_diff(fn, x: float, h: float = 1e-5) -> float:
    """Independent scalar finite-difference oracle."""
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def central_grad(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Independent vector finite-difference oracle."""
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g
