"""Shared test oracles: finite differences and random instance generators."""

import numpy as np

from slicescale.blockmin import BlockVector
from slicescale.tensor import DenseTensor, SliceTargets


def fd_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of a 1-d array."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(f, x, h=1e-4):
    """Second-order central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    n = x.size
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h * h)
    return H


def random_positive_tensor(rng, dims, low=0.1, high=1.0):
    return DenseTensor(rng.uniform(low, high, size=dims))


def random_compatible_targets(rng, dims, total=None):
    """Positive target vectors sharing a common total."""
    if total is None:
        total = float(rng.uniform(1.0, 5.0))
    vecs = []
    for m in dims:
        v = rng.uniform(0.2, 1.0, m)
        vecs.append(v * (total / v.sum()))
    return SliceTargets(vecs)


def random_pattern_tensor(rng, dims, density=0.6, max_tries=200):
    """Random nonnegative tensor with zeros but no zero slice."""
    for _ in range(max_tries):
        mask = rng.uniform(size=dims) < density
        arr = np.where(mask, rng.uniform(0.2, 1.0, size=dims), 0.0)
        try:
            return DenseTensor(arr)
        except ValueError:
            continue
    raise RuntimeError("could not draw a pattern with no zero slice")


def ambient_point(rng, dims, radius=1.0):
    return BlockVector([rng.uniform(-radius, radius, m) for m in dims])


def alternating_scaling(matrix, r, c, rounds):
    """Independent classical alternating row/column normalization."""
    M = np.array(matrix, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    for _ in range(rounds):
        M *= (r / M.sum(axis=1))[:, None]
        M *= (c / M.sum(axis=0))[None, :]
    return M
