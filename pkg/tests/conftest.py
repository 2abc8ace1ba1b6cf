import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_fd(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Unitary DFT with omega = exp(+2 pi i / n), O(n^2)."""
    n = len(x)
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) @ x / np.sqrt(n)


def givens(n, p, q, t):
    """Dense n x n RBS action on unary amplitudes: e_p -> c e_p + s e_q."""
    g = np.eye(n)
    c, s = np.cos(t), np.sin(t)
    g[p, p], g[q, q], g[q, p], g[p, q] = c, c, s, -s
    return g


def pairs(n):
    out = []
    s = 1
    while s < n:
        out += [(p, p + s) for p in range(n) if not p & s]
        s *= 2
    return out


def dense_layer(n, theta):
    m = np.eye(n)
    for (p, q), t in zip(pairs(n), theta):
        m = givens(n, p, q, t) @ m
    return m


def dense_weight(n, theta):
    return dense_layer(n, -np.asarray(theta)).T @ dense_layer(n, theta)
