"""Chi-square distances between histogram groups and Gram matrix construction."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DescriptorSet
from .errors import DimensionError, DomainError, InsufficientDataError, ParameterError

KERNELS = ("linear", "chi2_exp")


def _check_hist(h: np.ndarray, g: np.ndarray) -> None:
    if h.shape != g.shape or h.ndim != 1:
        raise DimensionError(f"histogram shapes differ: {h.shape} vs {g.shape}")
    if (h < 0).any() or (g < 0).any():
        raise DomainError("histogram entries must be non-negative")


def chi2_distance(h, g) -> float:
    """0.5 * sum((h - g)**2 / (h + g)), with empty bins contributing nothing."""
    h = np.asarray(h, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_hist(h, g)
    den = h + g
    nz = den > 0
    return float(0.5 * np.sum((h[nz] - g[nz]) ** 2 / den[nz]))


def averaged_chi2_distance(x: Sequence, y: Sequence) -> float:
    """Mean over descriptor groups of the per-group chi-square distance."""
    if len(x) != len(y):
        raise DimensionError(f"group counts differ: {len(x)} vs {len(y)}")
    if not len(x):
        raise DimensionError("samples have no descriptor groups")
    return sum(chi2_distance(a, b) for a, b in zip(x, y)) / len(x)


def chi2_distance_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise chi-square distances between the rows of A (n, d) and B (m, d).

    Accumulates bin by bin, so each entry is the same pure function of its
    two rows regardless of how the row blocks are partitioned.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError(f"incompatible histogram blocks {A.shape} and {B.shape}")
    out = np.zeros((A.shape[0], B.shape[0]))
    with np.errstate(invalid="ignore", divide="ignore"):
        for j in range(A.shape[1]):
            a = A[:, j][:, None]
            b = B[:, j][None, :]
            den = a + b
            term = (a - b) ** 2 / den
            out += np.where(den > 0, term, 0.0)
    return 0.5 * out


def _check_layout(A: DescriptorSet, B: DescriptorSet) -> None:
    if A.group_dims != B.group_dims:
        raise DimensionError(f"descriptor layouts differ: {A.group_dims} vs {B.group_dims}")


def averaged_chi2_matrix(A: DescriptorSet, B: DescriptorSet, groups: Sequence[int] | None = None) -> np.ndarray:
    """Pairwise averaged chi-square distances, optionally over a subset of groups."""
    _check_layout(A, B)
    groups = range(len(A.groups)) if groups is None else list(groups)
    if not len(groups):
        raise DimensionError("no descriptor groups selected")
    total = np.zeros((A.n_samples, B.n_samples))
    for k in groups:
        total += chi2_distance_matrix(A.groups[k], B.groups[k])
    return total / len(groups)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray
    kernel_id: str
    bandwidth: float | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def build_gram(
    A: DescriptorSet,
    B: DescriptorSet,
    kernel_id: str,
    bandwidth: float | None = None,
) -> GramMatrix:
    """Kernel values between every row of A and every row of B.

    ``linear`` is the dot product of the concatenated groups; ``chi2_exp`` is
    ``exp(-averaged_chi2 / bandwidth)``.
    """
    if kernel_id == "linear":
        _check_layout(A, B)
        return GramMatrix(A.stacked() @ B.stacked().T, "linear", None)
    if kernel_id == "chi2_exp":
        if bandwidth is None or not bandwidth > 0:
            raise ParameterError(f"chi2_exp needs a positive bandwidth, got {bandwidth}")
        return GramMatrix(np.exp(-averaged_chi2_matrix(A, B) / bandwidth), "chi2_exp", float(bandwidth))
    raise ParameterError(f"unknown kernel {kernel_id!r}; expected one of {KERNELS}")


def mean_distance_bandwidth(train: DescriptorSet, groups: Sequence[int] | None = None) -> float:
    """Mean averaged-chi2 distance over all unordered training pairs (1.0 if that is 0)."""
    n = train.n_samples
    if n < 2:
        raise InsufficientDataError("bandwidth heuristic needs at least 2 samples")
    D = averaged_chi2_matrix(train, train, groups)
    iu = np.triu_indices(n, k=1)
    mean = float(D[iu].mean())
    return mean if mean > 0 else 1.0


def write_gram_csv(gram: GramMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        n, m = gram.values.shape
        for i in range(n):
            for j in range(m):
                w.writerow([i, j, repr(float(gram.values[i, j]))])
