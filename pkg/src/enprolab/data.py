"""Datasets of histogram descriptor groups, train/test split plans and the leakage guard."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSplitError,
    DimensionError,
    DomainError,
    InsufficientDataError,
    LeakageError,
)

ROLES = ("labeled", "unlabeled", "test")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """A stack of G non-negative histogram groups with integer class labels.

    ``ids`` holds the original sample index of every row. A full dataset has
    ``ids == arange(n)``; a view produced by :func:`restrict` keeps the ids of
    the rows it exposes so that downstream code can audit which samples it saw.
    """

    groups: tuple[np.ndarray, ...]
    labels: np.ndarray
    class_count: int
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        groups = tuple(_frozen(np.asarray(g, dtype=np.float64)) for g in self.groups)
        labels = _frozen(np.asarray(self.labels, dtype=np.int64).reshape(-1))
        n = labels.shape[0]
        full = self.ids is None
        ids = np.arange(n, dtype=np.int64) if full else np.asarray(self.ids, dtype=np.int64).reshape(-1)
        if not groups:
            raise DimensionError("a descriptor set needs at least one group")
        for k, g in enumerate(groups):
            if g.ndim != 2 or g.shape[0] != n:
                raise DimensionError(f"group {k} has shape {g.shape}, expected ({n}, d)")
            if g.size and not np.all(np.isfinite(g)):
                raise DomainError(f"group {k} has non-finite entries")
            if g.size and g.min() < 0:
                raise DomainError(f"group {k} has negative entries")
        if ids.shape[0] != n:
            raise DimensionError("ids and labels disagree in length")
        if self.class_count < 1:
            raise DomainError("class_count must be positive")
        if n and (labels.min() < 0 or labels.max() >= self.class_count):
            raise DomainError(f"labels must lie in [0, {self.class_count})")
        if full:
            missing = set(range(self.class_count)) - set(labels.tolist())
            if missing:
                raise DomainError(f"classes without samples: {sorted(missing)}")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", _frozen(ids))

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def group_dims(self) -> tuple[int, ...]:
        return tuple(int(g.shape[1]) for g in self.groups)

    def __len__(self) -> int:
        return self.n_samples

    def stacked(self) -> np.ndarray:
        """All groups concatenated column-wise, shape (n, sum of group dims)."""
        return np.hstack(self.groups)

    def sample(self, i: int) -> tuple[np.ndarray, ...]:
        return tuple(g[i] for g in self.groups)


def restrict(data: DescriptorSet, ids: Iterable[int]) -> DescriptorSet:
    """View of ``data`` holding only the rows whose sample ids are in ``ids``.

    Ids refer to ``data.ids`` (original sample indices), and rows come out in
    ascending id order whatever the order of ``ids``.
    """
    wanted = np.unique(np.asarray(list(ids), dtype=np.int64))
    order = np.argsort(data.ids, kind="stable")
    known = data.ids[order]
    pos = np.searchsorted(known, wanted)
    found = pos < known.shape[0]
    found[found] = known[pos[found]] == wanted[found]
    if not np.all(found):
        raise IndexError(f"sample ids out of range: {wanted[~found][:5].tolist()}")
    pos = order[pos]
    return DescriptorSet(
        groups=tuple(g[pos] for g in data.groups),
        labels=data.labels[pos],
        class_count=data.class_count,
        ids=data.ids[pos],
    )


@dataclass(frozen=True, eq=False)
class SplitPlan:
    labeled_ids: np.ndarray
    unlabeled_train_ids: np.ndarray
    test_ids: np.ndarray
    leak_test_into_train: bool
    seed: int

    def __post_init__(self):
        for name in ("labeled_ids", "unlabeled_train_ids", "test_ids"):
            a = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            object.__setattr__(self, name, _frozen(a))

    def train_ids(self) -> np.ndarray:
        return np.union1d(self.labeled_ids, self.unlabeled_train_ids)

    def __eq__(self, other):
        if not isinstance(other, SplitPlan):
            return NotImplemented
        return (
            np.array_equal(self.labeled_ids, other.labeled_ids)
            and np.array_equal(self.unlabeled_train_ids, other.unlabeled_train_ids)
            and np.array_equal(self.test_ids, other.test_ids)
            and self.leak_test_into_train == other.leak_test_into_train
            and self.seed == other.seed
        )

    __hash__ = None


def _class_members(data: DescriptorSet) -> list[np.ndarray]:
    return [data.ids[data.labels == c] for c in range(data.class_count)]


def _unlabeled_count(fraction: float, pool: int) -> int:
    # 1e-9 guards against 0.7 * 10 == 6.999...
    return max(1, math.floor(fraction * pool + 1e-9))


def make_split(
    data: DescriptorSet,
    n_labeled_per_class: int,
    unlabeled_fraction: float,
    leak: bool,
    seed: int,
) -> SplitPlan:
    """Stratified labeled / unlabeled-train / test split.

    Per class (ascending class id) the class members are shuffled with one
    seeded generator; the first ``n_labeled_per_class`` become labeled, then
    ``floor(fraction * pool)`` (at least one) of the rest become unlabeled
    training data and the remainder is test. With ``leak`` the test ids are
    also appended to the unlabeled training set.
    """
    if not 0 < unlabeled_fraction <= 1:
        raise ValueError("unlabeled_fraction must lie in (0, 1]")
    if n_labeled_per_class < 0:
        raise ValueError("n_labeled_per_class must be non-negative")
    rng = np.random.default_rng(seed)
    labeled, unlabeled, test = [], [], []
    for c, members in enumerate(_class_members(data)):
        if members.shape[0] <= n_labeled_per_class:
            raise InsufficientDataError(
                f"class {c} has {members.shape[0]} samples, needs more than {n_labeled_per_class}"
            )
        perm = rng.permutation(members)
        pool = perm[n_labeled_per_class:]
        k = _unlabeled_count(unlabeled_fraction, pool.shape[0])
        labeled.append(perm[:n_labeled_per_class])
        unlabeled.append(pool[:k])
        test.append(pool[k:])
    test_ids = np.concatenate(test)
    if test_ids.size == 0:
        raise DegenerateSplitError("split leaves the test set empty")
    unlabeled_ids = np.concatenate(unlabeled)
    if leak:
        unlabeled_ids = np.concatenate([unlabeled_ids, test_ids])
    return SplitPlan(np.concatenate(labeled), unlabeled_ids, test_ids, bool(leak), int(seed))


def nested_split(
    data: DescriptorSet,
    n_labeled_per_class: int,
    unlabeled_fraction: float,
    leak: bool,
    seed: int,
    holdout: float = 0.5,
) -> SplitPlan:
    """Split with a test set that does not move when ``unlabeled_fraction`` changes.

    A base :func:`make_split` at ``1 - holdout`` fixes labeled and test ids;
    ``unlabeled_fraction`` then selects a per-class prefix of the base
    unlabeled pool (in shuffle order, so larger fractions are supersets).
    Fraction 1.0 reproduces the base split exactly. Used by sweeps so that
    MAP differences across fractions are paired on the same test samples.
    """
    if not 0 < unlabeled_fraction <= 1:
        raise ValueError("unlabeled_fraction must lie in (0, 1]")
    if not 0 < holdout < 1:
        raise ValueError("holdout must lie in (0, 1)")
    base = make_split(data, n_labeled_per_class, 1.0 - holdout, False, seed)
    # replay the base shuffle to recover the per-class draw order
    rng = np.random.default_rng(seed)
    unlabeled = []
    base_u = set(base.unlabeled_train_ids.tolist())
    for members in _class_members(data):
        perm = rng.permutation(members)
        pool = [i for i in perm[n_labeled_per_class:].tolist() if i in base_u]
        k = _unlabeled_count(unlabeled_fraction, len(pool))
        unlabeled.extend(pool[:k])
    unlabeled_ids = np.asarray(unlabeled, dtype=np.int64)
    if leak:
        unlabeled_ids = np.concatenate([unlabeled_ids, base.test_ids])
    return SplitPlan(base.labeled_ids, unlabeled_ids, base.test_ids, bool(leak), int(seed))


def assert_no_leak(plan: SplitPlan) -> bool:
    """True iff no test id is among the labeled or unlabeled training ids."""
    train = np.union1d(plan.labeled_ids, plan.unlabeled_train_ids)
    return np.intersect1d(plan.test_ids, train).size == 0


def guard_training_view(view: DescriptorSet, plan: SplitPlan) -> DescriptorSet:
    """Raise :class:`LeakageError` if a clean plan's training view holds test rows."""
    if not plan.leak_test_into_train:
        hit = np.intersect1d(view.ids, plan.test_ids)
        if hit.size:
            raise LeakageError(f"training view contains {hit.size} test ids, e.g. {hit[:5].tolist()}")
    return view


# --- CSV interchange -------------------------------------------------------

_FEATURE_COL = re.compile(r"^g(\d+)_(\d+)$")


def write_dataset_csv(data: DescriptorSet, path: str | Path) -> None:
    header = ["id", "label"] + [f"g{k}_{j}" for k, d in enumerate(data.group_dims) for j in range(d)]
    X = data.stacked()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(data.n_samples):
            w.writerow([int(data.ids[r]), int(data.labels[r])] + [repr(float(v)) for v in X[r]])


def read_dataset_csv(path: str | Path, class_count: int | None = None) -> DescriptorSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty dataset file")
    header, body = rows[0], rows[1:]
    if header[:2] != ["id", "label"]:
        raise DomainError(f"{path}: header must start with id,label")
    layout: list[tuple[int, int]] = []
    for name in header[2:]:
        m = _FEATURE_COL.match(name)
        if not m:
            raise DomainError(f"{path}: bad feature column {name!r}")
        layout.append((int(m.group(1)), int(m.group(2))))
    n_groups = max(k for k, _ in layout) + 1 if layout else 0
    cols: list[list[int]] = [[] for _ in range(n_groups)]
    for pos, (k, j) in enumerate(layout):
        if j != len(cols[k]):
            raise DomainError(f"{path}: columns of group {k} are not in order")
        cols[k].append(pos + 2)
    table = np.array([[float(v) for v in r] for r in body], dtype=np.float64).reshape(len(body), len(header))
    order = np.argsort(table[:, 0], kind="stable")
    table = table[order]
    ids = table[:, 0].astype(np.int64)
    if not np.array_equal(ids, np.arange(len(body))):
        raise DomainError(f"{path}: ids must be exactly 0..n-1")
    labels = table[:, 1].astype(np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if len(body) else 1
    return DescriptorSet(tuple(table[:, c] for c in cols), labels, class_count)


def write_split_csv(plan: SplitPlan, path: str | Path) -> None:
    rows = [(int(i), "labeled") for i in plan.labeled_ids]
    rows += [(int(i), "unlabeled") for i in plan.unlabeled_train_ids]
    rows += [(int(i), "test") for i in plan.test_ids]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "role"])
        w.writerows(sorted(rows, key=lambda r: (r[0], ROLES.index(r[1]))))


def read_split_csv(path: str | Path, seed: int = 0) -> SplitPlan:
    sets: dict[str, list[int]] = {r: [] for r in ROLES}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if row["role"] not in sets:
                raise DomainError(f"{path}: unknown role {row['role']!r}")
            sets[row["role"]].append(int(row["id"]))
    test = np.asarray(sets["test"], dtype=np.int64)
    leak = bool(np.intersect1d(test, sets["unlabeled"]).size)
    return SplitPlan(np.asarray(sets["labeled"], dtype=np.int64), np.asarray(sets["unlabeled"], dtype=np.int64), test, leak, seed)


def concat_views(views: Sequence[DescriptorSet]) -> DescriptorSet:
    """Stack views row-wise, keeping the given order (no re-sorting)."""
    first = views[0]
    return DescriptorSet(
        groups=tuple(np.vstack([v.groups[k] for v in views]) for k in range(len(first.groups))),
        labels=np.concatenate([v.labels for v in views]),
        class_count=first.class_count,
        ids=np.concatenate([v.ids for v in views]),
    )
