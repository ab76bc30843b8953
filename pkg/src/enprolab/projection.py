"""Ensemble Projections: pseudo-label hypotheses, ensemble training and the feature map.

Each hypothesis labels a small subset of the training pool with ``c``
pseudo-classes and trains one linear model per pseudo-class. Projecting a
sample concatenates every model's output, squashed by a sigmoid or raw.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import DescriptorSet
from .errors import DimensionError, LeakageError, ParameterError
from .kernels import averaged_chi2_matrix
from .linear import LinearModel, train_one_vs_rest

SAMPLERS = ("exotic", "uniform")


@dataclass(frozen=True, eq=False)
class PseudoHypothesis:
    pseudo_class_count: int
    assignments: tuple[tuple[int, int], ...]  # (sample id, pseudo-class)
    sampler_id: str

    @property
    def sample_ids(self) -> np.ndarray:
        return np.array([i for i, _ in self.assignments], dtype=np.int64)

    @property
    def pseudo_labels(self) -> np.ndarray:
        return np.array([c for _, c in self.assignments], dtype=np.int64)


def farthest_first(D: np.ndarray, k: int, first: int) -> list[int]:
    """Greedy farthest-first traversal of a distance matrix; ties go to the lower index."""
    chosen = [first]
    nearest = D[first].copy()
    for _ in range(k - 1):
        nearest[chosen] = -np.inf
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, D[nxt])
    return chosen


def sample_exotic_hypothesis(
    data: DescriptorSet,
    c: int,
    m: int,
    seed,
    distances: np.ndarray | None = None,
) -> PseudoHypothesis:
    """Mutually distant seeds, each grown by its m nearest unassigned neighbours.

    The first seed is a seeded uniform draw; the remaining ``c - 1`` follow
    farthest-first traversal under averaged chi-square. Seeds then claim
    neighbours in seed order.
    """
    n = data.n_samples
    if c < 2:
        raise ParameterError("need at least 2 pseudo-classes")
    if m < 0 or c * (m + 1) > n:
        raise ParameterError(f"c * (m + 1) = {c * (m + 1)} exceeds the {n} available samples")
    D = averaged_chi2_matrix(data, data) if distances is None else distances
    rng = np.random.default_rng(seed)
    seeds = farthest_first(D, c, int(rng.integers(n)))
    taken = np.zeros(n, dtype=bool)
    taken[seeds] = True
    assignments = []
    for cls, s in enumerate(seeds):
        assignments.append((s, cls))
        if m:
            order = np.argsort(np.where(taken, np.inf, D[s]), kind="stable")[:m]
            taken[order] = True
            assignments.extend((int(i), cls) for i in order)
    ids = data.ids
    return PseudoHypothesis(c, tuple((int(ids[i]), cls) for i, cls in assignments), "exotic")


def sample_uniform_hypothesis(data: DescriptorSet, c: int, samples_per_class: int, seed) -> PseudoHypothesis:
    """Uniform draw without replacement, cut into ``c`` classes in draw order."""
    n = data.n_samples
    if c < 2 or samples_per_class < 1:
        raise ParameterError("need c >= 2 and samples_per_class >= 1")
    if c * samples_per_class > n:
        raise ParameterError(f"c * samples_per_class = {c * samples_per_class} exceeds the {n} available samples")
    draw = np.random.default_rng(seed).choice(n, size=c * samples_per_class, replace=False)
    return PseudoHypothesis(
        c,
        tuple((int(data.ids[i]), k // samples_per_class) for k, i in enumerate(draw.tolist())),
        "uniform",
    )


@dataclass(frozen=True, eq=False)
class ProjectionEnsemble:
    hypotheses: tuple[PseudoHypothesis, ...]
    banks: tuple[tuple[LinearModel, ...], ...]
    use_sigmoid: bool
    input_dim: int
    params: dict

    def __post_init__(self):
        W = np.vstack([[m.weights for m in bank] for bank in self.banks]) if self.banks else np.zeros((0, self.input_dim))
        b = np.array([m.bias for bank in self.banks for m in bank])
        object.__setattr__(self, "_W", W)
        object.__setattr__(self, "_b", b)

    @property
    def output_dim(self) -> int:
        return sum(h.pseudo_class_count for h in self.hypotheses)


def hypothesis_seed(seed: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(t,))


def fit_ensemble(
    data: DescriptorSet,
    T: int = 100,
    c: int = 3,
    m: int = 5,
    sampler_id: str = "exotic",
    use_sigmoid: bool = True,
    C_reg: float = 1.0,
    seed: int = 0,
    loss: str = "logistic",
    forbidden_ids=None,
) -> ProjectionEnsemble:
    """Draw T pseudo-label hypotheses from ``data`` and train one bank per hypothesis.

    Both samplers label ``c * (m + 1)`` samples per hypothesis. Base models
    see only their assigned samples. ``forbidden_ids`` (normally the test
    ids of a clean split) must never appear in an assignment.
    """
    if T < 1:
        raise ParameterError("an ensemble needs at least one hypothesis")
    if sampler_id not in SAMPLERS:
        raise ParameterError(f"unknown sampler {sampler_id!r}; expected one of {SAMPLERS}")
    forbidden = None if forbidden_ids is None else np.asarray(forbidden_ids, dtype=np.int64)
    X = data.stacked()
    D = averaged_chi2_matrix(data, data) if sampler_id == "exotic" else None
    pos = {int(i): r for r, i in enumerate(data.ids)}
    hyps, banks = [], []
    for t in range(T):
        ss = hypothesis_seed(seed, t)
        try:
            if sampler_id == "exotic":
                h = sample_exotic_hypothesis(data, c, m, ss, distances=D)
            else:
                h = sample_uniform_hypothesis(data, c, m + 1, ss)
            if forbidden is not None and np.intersect1d(h.sample_ids, forbidden).size:
                raise LeakageError("hypothesis assigned a forbidden (test) sample")
            rows = [pos[i] for i in h.sample_ids.tolist()]
            train_seed = int(ss.generate_state(1)[0])
            bank = train_one_vs_rest(X[rows], h.pseudo_labels, c, loss, C_reg, train_seed)
        except Exception as exc:
            exc.args = (f"hypothesis {t}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        hyps.append(h)
        banks.append(tuple(bank))
    params = {"T": T, "c": c, "m": m, "sampler_id": sampler_id, "use_sigmoid": bool(use_sigmoid),
              "seed": int(seed), "C_reg": float(C_reg), "loss": loss}
    return ProjectionEnsemble(tuple(hyps), tuple(banks), bool(use_sigmoid), X.shape[1], params)


def project(ensemble: ProjectionEnsemble, x) -> np.ndarray:
    """Feature map of one stacked sample (1-D) or a batch (rows), or a DescriptorSet."""
    if isinstance(x, DescriptorSet):
        x = x.stacked()
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != ensemble.input_dim:
        raise DimensionError(f"expected {ensemble.input_dim} input features, got {x.shape[-1]}")
    z = x @ ensemble._W.T + ensemble._b
    return expit(z) if ensemble.use_sigmoid else z


def save_ensemble(ensemble: ProjectionEnsemble, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = dict(ensemble.params, input_dim=ensemble.input_dim, files=[])
    for t, (h, bank) in enumerate(zip(ensemble.hypotheses, ensemble.banks)):
        name = f"hypothesis_{t:04d}.csv"
        manifest["files"].append({"file": name, "pseudo_class_count": h.pseudo_class_count,
                                  "assignments": [list(a) for a in h.assignments], "sampler_id": h.sampler_id})
        with open(directory / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pseudo_class", "dim", "weight"])
            for k, model in enumerate(bank):
                for j, v in enumerate(model.weights):
                    w.writerow([k, j, repr(float(v))])
                w.writerow([k, "bias", repr(float(model.bias))])
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_ensemble(directory: str | Path) -> ProjectionEnsemble:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    dim = manifest["input_dim"]
    hyps, banks = [], []
    for entry in manifest["files"]:
        c = entry["pseudo_class_count"]
        weights = np.zeros((c, dim))
        bias = np.zeros(c)
        with open(directory / entry["file"], newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                k = int(row["pseudo_class"])
                if row["dim"] == "bias":
                    bias[k] = float(row["weight"])
                else:
                    weights[k, int(row["dim"])] = float(row["weight"])
        hyps.append(PseudoHypothesis(c, tuple(tuple(a) for a in entry["assignments"]), entry["sampler_id"]))
        banks.append(tuple(LinearModel(weights[k], float(bias[k]), manifest["loss"], manifest["C_reg"]) for k in range(c)))
    params = {k: manifest[k] for k in ("T", "c", "m", "sampler_id", "use_sigmoid", "seed", "C_reg", "loss")}
    return ProjectionEnsemble(tuple(hyps), tuple(banks), manifest["use_sigmoid"], dim, params)
