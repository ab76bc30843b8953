"""C-SVM over precomputed Gram matrices, trained by SMO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabelsError, DimensionError, DomainError, ParameterError
from .kernels import GramMatrix

CURVATURE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class KernelModel:
    support_coefficients: np.ndarray  # alpha_i * y_i
    bias: float
    training_ids: np.ndarray
    kernel_id: str
    bandwidth: float | None
    C: float
    iterations: int = 0

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.support_coefficients)


def _values(K) -> np.ndarray:
    return K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    """sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij (to be maximized)."""
    v = alpha * y
    return float(alpha.sum() - 0.5 * v @ K @ v)


def _rho(alpha, G, y, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2)


def train_kernel_binary(
    K,
    y,
    C: float = 1.0,
    tol: float = 1e-3,
    seed: int = 0,
    max_iter: int = 100_000,
    training_ids=None,
    debug: bool = False,
) -> KernelModel:
    """Solve the C-SVM dual with maximal-violating-pair SMO.

    Pair selection is deterministic (lowest index on ties), so ``seed`` does
    not influence the result; it is accepted for interface symmetry with the
    linear learners. With ``debug`` the dual objective is checked to be
    non-decreasing after every update.
    """
    Kv = _values(K)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    if Kv.shape != (n, n):
        raise DimensionError(f"Gram matrix {Kv.shape} does not match {n} labels")
    scale = max(1.0, float(np.abs(Kv).max())) if n else 1.0
    if not np.allclose(Kv, Kv.T, rtol=0, atol=1e-10 * scale):
        raise DomainError("Gram matrix is not symmetric")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DomainError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise DegenerateLabelsError("both label signs are required")
    if not C > 0:
        raise ParameterError("C must be positive")

    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(Kv).copy()
    pos = y > 0
    it = 0
    last = 0.0
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -y * G
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if not (up.any() and low.any()) or gap < tol:
            break
        it += 1
        eta = diag[i] + diag[j] - 2.0 * Kv[i, j]
        if eta <= CURVATURE_FLOOR:
            eta = CURVATURE_FLOOR
        lam = gap / eta
        room_i = C - alpha[i] if pos[i] else alpha[i]
        room_j = alpha[j] if pos[j] else C - alpha[j]
        lam = min(lam, room_i, room_j)
        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        # snap onto the box to stop drift
        for t in (i, j):
            if alpha[t] < 1e-15 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-15):
                alpha[t] = C
        G += lam * y * (Kv[:, i] - Kv[:, j])
        if debug:
            cur = dual_objective(alpha, Kv, y)
            assert cur >= last - 1e-12 * max(1.0, abs(last)), f"dual objective fell at iteration {it}"
            last = cur

    rho = _rho(alpha, G, y, C)
    ids = np.arange(n) if training_ids is None else np.asarray(training_ids)
    kid = K.kernel_id if isinstance(K, GramMatrix) else "precomputed"
    bw = K.bandwidth if isinstance(K, GramMatrix) else None
    return KernelModel(alpha * y, -rho, ids, kid, bw, float(C), it)


def kernel_decision(model: KernelModel, k_row):
    """sum_i coef_i * k_row[i] + bias, for one kernel row or a (m, n) block."""
    k_row = _values(k_row)
    if k_row.shape[-1] != model.support_coefficients.shape[0]:
        raise DimensionError(
            f"kernel row has {k_row.shape[-1]} entries, model has {model.support_coefficients.shape[0]}"
        )
    out = k_row @ model.support_coefficients + model.bias
    return float(out) if np.ndim(out) == 0 else out


def train_kernel_ovr(K, y, n_classes: int | None = None, C: float = 1.0, tol: float = 1e-3, seed: int = 0, training_ids=None):
    y = np.asarray(y).reshape(-1)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    missing = sorted(set(range(n_classes)) - set(y.tolist()))
    if missing:
        raise DegenerateLabelsError(f"classes absent from training labels: {missing}")
    return [
        train_kernel_binary(K, np.where(y == c, 1.0, -1.0), C, tol, seed, training_ids=training_ids)
        for c in range(n_classes)
    ]


def kernel_ovr_scores(models, K_test) -> np.ndarray:
    """(m, n_classes) decision values for a test-by-train kernel block."""
    Kt = _values(K_test)
    coef = np.stack([m.support_coefficients for m in models], axis=1)
    return Kt @ coef + np.array([m.bias for m in models])
