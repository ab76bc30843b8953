"""Bundled small problems (10 points or fewer) shared by the unit and acceptance tests."""

import numpy as np


def linear_problems():
    """(name, X, y, C) tuples for the linear solvers."""
    out = [
        ("toy4", np.array([[0.0, 1.0], [1.0, 2.0], [2.0, 0.0], [3.0, 1.0]]), np.array([-1.0, -1.0, 1.0, 1.0]), 1.0),
        ("overlap6", np.array([[0.0, 0.0], [1.0, 0.5], [0.4, 0.9], [0.9, 0.1], [0.2, 0.3], [1.2, 1.0]]),
         np.array([-1.0, 1.0, -1.0, 1.0, 1.0, -1.0]), 2.0),
    ]
    rng = np.random.default_rng(11)
    for k, n in enumerate((5, 7, 8, 10)):
        X = rng.normal(size=(n, 3))
        y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        y[0], y[1] = 1.0, -1.0
        out.append((f"rand{n}", X, y, [0.3, 1.0, 5.0, 0.7][k]))
    return out


def kernel_problems():
    """(name, K, y, C) tuples with PSD Grams, 8 points or fewer."""
    out = []
    rng = np.random.default_rng(5)
    # mix of free, upper-bound and all-bounded solutions
    for k, (n, C, bw) in enumerate(((2, 10.0, 0.3), (4, 20.0, 1.0), (6, 5.0, 1.0), (8, 50.0, 2.0), (8, 1.0, 0.5))):
        Z = rng.dirichlet(np.ones(4), size=n)
        D = 0.5 * ((Z[:, None, :] - Z[None, :, :]) ** 2 / (Z[:, None, :] + Z[None, :, :])).sum(-1)
        K = np.exp(-D / bw)
        y = np.array([1.0, -1.0] * (n // 2))
        rng.shuffle(y)
        out.append((f"chi2_{n}_{k}", K, y, C))
    X = rng.normal(size=(7, 2))
    out.append(("lin7", X @ X.T, np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0]), 1.0))
    return out
