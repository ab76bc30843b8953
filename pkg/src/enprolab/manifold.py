"""Manifold-regularized least squares (LapRLS) on a kNN chi-square graph.

The graph is built on a single descriptor group; the kernel expansion runs
over labeled points first, then unlabeled training points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import DescriptorSet
from .errors import DegenerateLabelsError, DimensionError, NumericalError, ParameterError
from .kernels import GramMatrix, averaged_chi2_matrix

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    node_ids: np.ndarray
    weights: np.ndarray
    k_nn: int
    bandwidth: float = 1.0


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    expansion_coefficients: np.ndarray  # (l + u, n_classes)
    bias: np.ndarray  # the closed form has no intercept; kept at zero
    gamma_A: float
    gamma_I: float
    kernel_id: str
    bandwidth: float | None
    n_labeled: int

    def scores(self, k_block) -> np.ndarray:
        """Class scores for a (m, l + u) block of kernel values."""
        kb = k_block.values if isinstance(k_block, GramMatrix) else np.asarray(k_block, dtype=np.float64)
        if kb.shape[-1] != self.expansion_coefficients.shape[0]:
            raise DimensionError(f"kernel block has {kb.shape[-1]} columns, expected {self.expansion_coefficients.shape[0]}")
        return kb @ self.expansion_coefficients + self.bias


def nearest_neighbors(D: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other nodes per row; ties go to the lower index."""
    n = D.shape[0]
    D = D.copy()
    D[np.arange(n), np.arange(n)] = np.inf
    return np.argsort(D, axis=1, kind="stable")[:, :k]


def build_knn_graph(data: DescriptorSet, reg_group: int = 0, k_nn: int = 10) -> NeighborGraph:
    """Symmetrized kNN graph with heat-kernel weights under chi-square on one group.

    The bandwidth is the mean distance along the kNN edges (1.0 if that is 0),
    and symmetrization keeps an edge if either endpoint selected it.
    """
    n = data.n_samples
    if not 0 <= reg_group < len(data.groups):
        raise ParameterError(f"reg_group {reg_group} out of range for {len(data.groups)} groups")
    if not 1 <= k_nn < n:
        raise ParameterError(f"k_nn must lie in [1, {n}), got {k_nn}")
    D = averaged_chi2_matrix(data, data, [reg_group])
    nbrs = nearest_neighbors(D, k_nn)
    rows = np.repeat(np.arange(n), k_nn)
    cols = nbrs.reshape(-1)
    d = D[rows, cols]
    sigma = float(d.mean())
    sigma = sigma if sigma > 0 else 1.0
    W = np.zeros((n, n))
    W[rows, cols] = np.exp(-d / sigma)
    W = np.maximum(W, W.T)
    return NeighborGraph(data.ids.copy(), W, int(k_nn), sigma)


def graph_laplacian(graph: NeighborGraph, normalized: bool = False) -> np.ndarray:
    """D - W, or I - D^-1/2 W D^-1/2 when ``normalized``."""
    W = graph.weights
    deg = W.sum(axis=1)
    if not normalized:
        return np.diag(deg) - W
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    return np.diag((deg > 0).astype(float)) - inv[:, None] * W * inv[None, :]


def train_manifold(
    K,
    L,
    y,
    n_classes: int | None = None,
    gamma_A: float = 1e-2,
    gamma_I: float = 1e-2,
) -> ManifoldModel:
    """Closed-form LapRLS, one-vs-rest.

    For each class the coefficients solve

        (J K + gamma_A l I + gamma_I l / (l + u)^2 L K) a = J y_c

    where J selects the first ``l = len(y)`` (labeled) nodes and ``y_c`` is
    +1 for the class and -1 otherwise.
    """
    Kv = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)
    y = np.asarray(y).reshape(-1)
    n = Kv.shape[0]
    l = y.shape[0]
    L = np.zeros((n, n)) if L is None or np.size(L) == 0 else np.asarray(L, dtype=np.float64)
    if Kv.shape != (n, n) or L.shape != (n, n):
        raise DimensionError(f"kernel {Kv.shape} and Laplacian {L.shape} must both be ({n}, {n})")
    if l == 0 or l > n:
        raise DimensionError(f"{l} labels for {n} expansion points")
    if gamma_A < 0 or gamma_I < 0:
        raise ParameterError("regularization weights must be non-negative")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    missing = sorted(set(range(n_classes)) - set(y.tolist()))
    if missing:
        raise DegenerateLabelsError(f"classes absent from labeled points: {missing}")

    J = np.zeros(n)
    J[:l] = 1.0
    M = J[:, None] * Kv + gamma_A * l * np.eye(n) + (gamma_I * l / n**2) * (L @ Kv)
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(f"manifold system is singular (condition estimate {cond:.3g})", cond)
    Y = np.zeros((n, n_classes))
    Y[np.arange(l), :] = -1.0
    Y[np.arange(l), y] = 1.0
    A = np.linalg.solve(M, Y)
    kid = K.kernel_id if isinstance(K, GramMatrix) else "precomputed"
    bw = K.bandwidth if isinstance(K, GramMatrix) else None
    return ManifoldModel(A, np.zeros(n_classes), float(gamma_A), float(gamma_I), kid, bw, l)


def write_graph_csv(graph: NeighborGraph, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "weight"])
        ii, jj = np.nonzero(np.triu(graph.weights, k=1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            w.writerow([int(graph.node_ids[i]), int(graph.node_ids[j]), repr(float(graph.weights[i, j]))])
