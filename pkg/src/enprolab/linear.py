"""Regularized linear binary classifiers and their one-vs-rest wrapper.

The bias is learned as the weight of an appended constant feature, so the
objective minimized is

    0.5 * (||w||^2 + b^2) + C * sum_i loss(y_i, w.x_i + b)

with ``hinge_squared`` solved by dual coordinate descent and ``logistic`` by
damped Newton iterations in the primal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import DegenerateLabelsError, DimensionError, DomainError, ParameterError

LOSSES = ("hinge_squared", "logistic")


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    trained_with_loss: str
    regularization_c: float
    epochs: int = 0

    @classmethod
    def zero(cls, dim: int, loss: str = "logistic", C: float = 1.0) -> "LinearModel":
        return cls(np.zeros(dim), 0.0, loss, C)

    def negated(self) -> "LinearModel":
        return LinearModel(-self.weights, -self.bias, self.trained_with_loss, self.regularization_c, self.epochs)


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _check_problem(X, y, C):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has shape {X.shape} but y has {y.shape[0]} entries")
    if not np.all(np.isfinite(X)):
        raise DomainError("features must be finite")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DomainError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise DegenerateLabelsError("both label signs are required")
    if not C > 0:
        raise ParameterError("C must be positive")
    return X, y


def primal_objective(w_aug: np.ndarray, X: np.ndarray, y: np.ndarray, loss: str, C: float) -> float:
    """Objective value of an augmented weight vector (last entry is the bias)."""
    z = y * (_augment(np.asarray(X, dtype=np.float64)) @ w_aug)
    if loss == "hinge_squared":
        data = np.sum(np.maximum(0.0, 1.0 - z) ** 2)
    elif loss == "logistic":
        data = np.sum(np.logaddexp(0.0, -z))
    else:
        raise ParameterError(f"unknown loss {loss!r}")
    return float(0.5 * w_aug @ w_aug + C * data)


def _dual_cd_squared_hinge(Xa, y, C, rng, tol, max_epochs):
    n = Xa.shape[0]
    diag = 0.5 / C
    Q = np.einsum("ij,ij->i", Xa, Xa) + diag
    alpha = np.zeros(n)
    w = np.zeros(Xa.shape[1])
    rows = [Xa[i] for i in range(n)]
    yl = y.tolist()
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        worst = 0.0
        for i in rng.permutation(n).tolist():
            xi = rows[i]
            G = yl[i] * float(w @ xi) - 1.0 + diag * alpha[i]
            pg = G if alpha[i] > 0 else min(G, 0.0)
            if abs(pg) > worst:
                worst = abs(pg)
            if pg != 0.0:
                old = alpha[i]
                alpha[i] = max(old - G / Q[i], 0.0)
                w += (alpha[i] - old) * yl[i] * xi
        if worst < tol:
            break
    return w, epoch


def _newton_logistic(Xa, y, C, tol, max_iter):
    w = np.zeros(Xa.shape[1])
    eye = np.eye(Xa.shape[1])

    def fval(v):
        return 0.5 * v @ v + C * np.sum(np.logaddexp(0.0, -y * (Xa @ v)))

    f = fval(w)
    it = 0
    for it in range(1, max_iter + 1):
        z = y * (Xa @ w)
        s = expit(-z)
        grad = w - C * Xa.T @ (y * s)
        if np.max(np.abs(grad)) < tol:
            break
        H = eye + C * (Xa.T * (s * (1.0 - s))) @ Xa
        step = np.linalg.solve(H, grad)
        t = 1.0
        slope = grad @ step
        while True:
            cand = w - t * step
            fc = fval(cand)
            if fc <= f - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        w, f = cand, fc
    return w, it


def train_binary(
    X,
    y,
    loss: str = "hinge_squared",
    C: float = 1.0,
    seed: int = 0,
    tol: float = 1e-6,
    max_epochs: int = 1000,
) -> LinearModel:
    """Train a linear binary classifier on labels in {-1, +1}.

    Training stops once the largest projected-gradient violation (dual
    coordinate descent) or gradient entry (Newton) drops below ``tol``, or
    after ``max_epochs`` passes. The seed only fixes the coordinate visiting
    order, so equal inputs give bit-identical weights.
    """
    X, y = _check_problem(X, y, C)
    Xa = _augment(X)
    if loss == "hinge_squared":
        w, epochs = _dual_cd_squared_hinge(Xa, y, C, np.random.default_rng(seed), tol, max_epochs)
    elif loss == "logistic":
        w, epochs = _newton_logistic(Xa, y, C, tol, max_epochs)
    else:
        raise ParameterError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    return LinearModel(w[:-1].copy(), float(w[-1]), loss, float(C), epochs)


def decision_value(model: LinearModel, x):
    """w.x + b for one vector or each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.weights.shape[0]:
        raise DimensionError(f"expected {model.weights.shape[0]} features, got {x.shape[-1]}")
    out = x @ model.weights + model.bias
    return float(out) if np.ndim(out) == 0 else out


def probability_value(model: LinearModel, x):
    """Logistic squashing of the decision value, in (0, 1)."""
    out = expit(decision_value(model, x))
    return float(out) if np.ndim(out) == 0 else out


def train_one_vs_rest(X, y, n_classes: int | None = None, loss="hinge_squared", C=1.0, seed=0, tol=1e-6):
    """One model per class, class c against the rest.

    Every class model uses the same seed so that relabelling the classes only
    permutes the returned list.
    """
    y = np.asarray(y).reshape(-1)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    missing = sorted(set(range(n_classes)) - set(y.tolist()))
    if missing:
        raise DegenerateLabelsError(f"classes absent from training labels: {missing}")
    return [train_binary(X, np.where(y == c, 1.0, -1.0), loss, C, seed, tol) for c in range(n_classes)]


def ovr_scores(models, X) -> np.ndarray:
    """(n, n_classes) matrix of decision values."""
    W = np.stack([m.weights for m in models], axis=1)
    b = np.array([m.bias for m in models])
    return np.asarray(X, dtype=np.float64) @ W + b


def write_model_csv(model: LinearModel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dim", "weight"])
        for j, v in enumerate(model.weights):
            w.writerow([j, repr(float(v))])
        w.writerow(["bias", repr(float(model.bias))])


def read_model_csv(path: str | Path, loss: str = "logistic", C: float = 1.0) -> LinearModel:
    weights, bias = [], 0.0
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["dim"] == "bias":
                bias = float(row["weight"])
            else:
                weights.append(float(row["weight"]))
    return LinearModel(np.array(weights), bias, loss, C)
