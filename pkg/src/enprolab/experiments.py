"""Method runner, MAP evaluation and the grid experiments (leakage, baselines, sweeps)."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import DescriptorSet, SplitPlan, assert_no_leak, concat_views, guard_training_view, nested_split, restrict
from .errors import ConfigError, EvaluationError, LabError, LeakageError
from .kernel_svm import kernel_ovr_scores, train_kernel_ovr
from .kernels import build_gram, mean_distance_bandwidth
from .linear import ovr_scores, train_one_vs_rest
from .manifold import build_knn_graph, graph_laplacian, train_manifold
from .projection import fit_ensemble, project

log = logging.getLogger(__name__)

METHODS = ("svm_linear", "svm_chi2", "lapsvm_chi2", "enpro", "enpro_uniform", "enpro_nosigmoid")
BANDWIDTH_MODES = ("train", "labeled")
RESULT_COLUMNS = ("method", "n_labeled", "unlabeled_fraction", "leak", "seed", "map")
AGGREGATE_COLUMNS = ("method", "n_labeled", "unlabeled_fraction", "leak", "map_mean", "map_std")
LEAKAGE_COLUMNS = ("method", "n_labeled", "unlabeled_fraction", "delta_mean", "delta_std", "n_seeds")


# --- metrics ---------------------------------------------------------------

def average_precision(scores, relevance) -> float:
    """Non-interpolated AP; ties in score are ranked by ascending index."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    rel = np.asarray(relevance, dtype=bool).reshape(-1)
    if scores.shape != rel.shape:
        raise ValueError(f"{scores.shape[0]} scores but {rel.shape[0]} relevance flags")
    R = int(rel.sum())
    if R == 0:
        raise EvaluationError("average precision is undefined without relevant items")
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    hits = rel[order]
    ranks = np.flatnonzero(hits) + 1
    # correctly rounded sum: the result does not depend on summation order
    return math.fsum((np.arange(1, R + 1) / ranks).tolist()) / R


def mean_average_precision(class_scores, test_labels) -> float:
    """Mean AP over classes, scoring column c of ``class_scores`` against label c.

    Classes without test positives are skipped with a warning.
    """
    S = np.asarray(class_scores, dtype=np.float64)
    labels = np.asarray(test_labels).reshape(-1)
    if S.ndim != 2 or S.shape[0] != labels.shape[0]:
        raise ValueError(f"scores {S.shape} do not match {labels.shape[0]} test labels")
    aps = []
    for c in range(S.shape[1]):
        rel = labels == c
        if not rel.any():
            log.warning("class %d has no test positives; skipped in MAP", c)
            continue
        aps.append(average_precision(S[:, c], rel))
    if not aps:
        raise EvaluationError("no class has test positives")
    return float(np.mean(aps))


# --- configuration and records --------------------------------------------

@dataclass(frozen=True)
class MethodConfig:
    method: str
    C: float = 100.0
    C_final: float = 1.0
    T: int = 100
    c: int = 3
    m: int = 5
    k_nn: int = 10
    gamma_A: float = 1e-2
    gamma_I: float = 10.0
    bandwidth_mode: str = "train"
    reg_group: int = 0
    normalized_laplacian: bool = False
    tol: float = 1e-3

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; valid ids: {', '.join(METHODS)}")
        if self.C <= 0 or self.C_final <= 0:
            raise ConfigError("C values must be positive")
        if self.bandwidth_mode not in BANDWIDTH_MODES:
            raise ConfigError(f"bandwidth_mode must be one of {BANDWIDTH_MODES}")
        if self.method.startswith("enpro"):
            if self.T < 1:
                raise ConfigError("enpro needs T >= 1 (empty feature map)")
            if self.c < 2 or self.m < 0:
                raise ConfigError("enpro needs c >= 2 and m >= 0")
        if self.method == "lapsvm_chi2":
            if self.k_nn < 1:
                raise ConfigError("k_nn must be positive")
            if self.gamma_A < 0 or self.gamma_I < 0:
                raise ConfigError("gamma_A and gamma_I must be non-negative")


@dataclass(frozen=True)
class ExperimentRecord:
    method: str
    n_labeled: int
    unlabeled_fraction: float
    leak: bool
    seed: int
    map: float

    def key(self):
        return (self.method, self.n_labeled, self.unlabeled_fraction, self.leak, self.seed)


# --- methods ---------------------------------------------------------------

def _bandwidth(cfg: MethodConfig, labeled: DescriptorSet, train: DescriptorSet) -> float:
    return mean_distance_bandwidth(labeled if cfg.bandwidth_mode == "labeled" else train)


def _scores(cfg: MethodConfig, data: DescriptorSet, plan: SplitPlan) -> np.ndarray:
    labeled = guard_training_view(restrict(data, plan.labeled_ids), plan)
    unlabeled = guard_training_view(restrict(data, plan.unlabeled_train_ids), plan)
    test = restrict(data, plan.test_ids)
    C = data.class_count
    y = labeled.labels
    m = cfg.method

    if m == "svm_linear":
        models = train_one_vs_rest(labeled.stacked(), y, C, "hinge_squared", cfg.C, plan.seed)
        return ovr_scores(models, test.stacked())

    if m == "svm_chi2":
        train = restrict(data, plan.train_ids())
        bw = _bandwidth(cfg, labeled, train)
        models = train_kernel_ovr(build_gram(labeled, labeled, "chi2_exp", bw), y, C, cfg.C, cfg.tol, plan.seed)
        return kernel_ovr_scores(models, build_gram(test, labeled, "chi2_exp", bw))

    if m == "lapsvm_chi2":
        nodes = concat_views([labeled, unlabeled]) if unlabeled.n_samples else labeled
        bw = _bandwidth(cfg, labeled, nodes)
        K = build_gram(nodes, nodes, "chi2_exp", bw)
        k_nn = min(cfg.k_nn, nodes.n_samples - 1)
        L = graph_laplacian(build_knn_graph(nodes, cfg.reg_group, k_nn), cfg.normalized_laplacian)
        model = train_manifold(K, L, y, C, cfg.gamma_A, cfg.gamma_I)
        return model.scores(build_gram(test, nodes, "chi2_exp", bw))

    # enpro family: the sampling pool is every training row, labeled or not
    pool = guard_training_view(restrict(data, plan.train_ids()), plan)
    ensemble = fit_ensemble(
        pool,
        T=cfg.T,
        c=cfg.c,
        m=cfg.m,
        sampler_id="uniform" if m == "enpro_uniform" else "exotic",
        use_sigmoid=m != "enpro_nosigmoid",
        C_reg=cfg.C,
        seed=plan.seed,
        forbidden_ids=None if plan.leak_test_into_train else plan.test_ids,
    )
    phi_l = project(ensemble, labeled)
    phi_t = project(ensemble, test)
    K = phi_l @ phi_l.T
    models = train_kernel_ovr(K, y, C, cfg.C_final, cfg.tol, plan.seed)
    return kernel_ovr_scores(models, phi_t @ phi_l.T)


def run_method(config: MethodConfig, data: DescriptorSet, plan: SplitPlan, unlabeled_fraction: float | None = None) -> ExperimentRecord:
    """Train ``config.method`` on the plan's training roles and return test MAP."""
    config.validate()
    if not plan.leak_test_into_train and not assert_no_leak(plan):
        raise LeakageError("plan is marked clean but its test ids overlap the training ids")
    try:
        scores = _scores(config, data, plan)
        value = mean_average_precision(scores, restrict(data, plan.test_ids).labels)
    except LeakageError:
        raise
    except LabError as exc:
        raise type(exc)(f"[{config.method}] {exc}") from exc
    n_labeled = int(plan.labeled_ids.shape[0] // data.class_count)
    if unlabeled_fraction is None:
        pool = data.n_samples - plan.labeled_ids.shape[0]
        clean_u = np.setdiff1d(plan.unlabeled_train_ids, plan.test_ids).shape[0]
        unlabeled_fraction = round(clean_u / pool, 6)
    return ExperimentRecord(config.method, n_labeled, float(unlabeled_fraction), plan.leak_test_into_train, plan.seed, value)


# --- grids -----------------------------------------------------------------

@dataclass(frozen=True)
class Job:
    config: MethodConfig
    n_labeled: int
    fraction: float
    leak: bool
    seed: int
    holdout: float = 0.5


def _run_job(data: DescriptorSet, job: Job) -> ExperimentRecord:
    plan = nested_split(data, job.n_labeled, job.fraction, job.leak, job.seed, job.holdout)
    return run_method(job.config, data, plan, job.fraction)


_WORKER_DATA: DescriptorSet | None = None


def _init_worker(data):
    global _WORKER_DATA
    _WORKER_DATA = data


def _worker(job):
    return _run_job(_WORKER_DATA, job)


def run_jobs(data: DescriptorSet, jobs: Sequence[Job], n_jobs: int = 1) -> list[ExperimentRecord]:
    """Run grid cells, serially or in a process pool; output is sorted by record key."""
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs, initializer=_init_worker, initargs=(data,)) as pool:
            records = list(pool.map(_worker, jobs))
    else:
        records = [_run_job(data, j) for j in jobs]
    return sorted(records, key=ExperimentRecord.key)


def unlabeled_sweep(config, data, n_labeled_grid, fraction_grid, seeds, holdout=0.5, n_jobs=1) -> list[ExperimentRecord]:
    """Every (n_labeled, fraction, seed) combination with a clean split."""
    configs = config if isinstance(config, (list, tuple)) else [config]
    jobs = [Job(cfg, n, f, False, s, holdout) for cfg in configs for n in n_labeled_grid for f in fraction_grid for s in seeds]
    return run_jobs(data, jobs, n_jobs)


@dataclass(frozen=True)
class LeakageRow:
    method: str
    n_labeled: int
    unlabeled_fraction: float
    delta_mean: float
    delta_std: float
    deltas: tuple[float, ...] = field(default=())


def paired_delta(config: MethodConfig, data: DescriptorSet, leak_plan: SplitPlan, clean_plan: SplitPlan) -> float:
    return run_method(config, data, leak_plan).map - run_method(config, data, clean_plan).map


def _std(values) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def leakage_table(records: Iterable[ExperimentRecord]) -> list[LeakageRow]:
    """Pair each clean record with the leaked record of the same (method, n_labeled, seed)."""
    records = list(records)
    leaked = {(r.method, r.n_labeled, r.seed): r.map for r in records if r.leak}
    cells: dict[tuple, list[float]] = {}
    for r in records:
        if r.leak or (r.method, r.n_labeled, r.seed) not in leaked:
            continue
        cells.setdefault((r.method, r.n_labeled, r.unlabeled_fraction), []).append(leaked[(r.method, r.n_labeled, r.seed)] - r.map)
    return [LeakageRow(k[0], k[1], k[2], float(np.mean(v)), _std(v), tuple(v)) for k, v in sorted(cells.items())]


def leakage_jobs(configs, n_labeled_grid, fractions, seeds, holdout=0.5) -> list[Job]:
    jobs = []
    for cfg in configs:
        for n in n_labeled_grid:
            for s in seeds:
                # leaked run: every non-test unlabeled sample plus the test set itself
                jobs.append(Job(cfg, n, 1.0, True, s, holdout))
                jobs.extend(Job(cfg, n, f, False, s, holdout) for f in fractions)
    return jobs


def leakage_delta(config, data, n_labeled, fractions, seeds, holdout=0.5, n_jobs=1) -> list[LeakageRow]:
    """MAP(test set also used as unlabeled data) - MAP(clean, given fraction), per fraction.

    Both runs of a pair share labeled and test ids; the leaked run adds the
    whole non-test pool and the test set to the unlabeled data.
    """
    configs = config if isinstance(config, (list, tuple)) else [config]
    grid = n_labeled if isinstance(n_labeled, (list, tuple)) else [n_labeled]
    records = run_jobs(data, leakage_jobs(configs, grid, fractions, seeds, holdout), n_jobs)
    return leakage_table(records)


def aggregate(records: Iterable[ExperimentRecord]) -> list[dict]:
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.method, r.n_labeled, r.unlabeled_fraction, r.leak), []).append(r.map)
    return [
        {"method": k[0], "n_labeled": k[1], "unlabeled_fraction": k[2], "leak": k[3],
         "map_mean": float(np.mean(v)), "map_std": _std(v)}
        for k, v in sorted(cells.items())
    ]


# --- CSV -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def write_results_csv(records: Iterable[ExperimentRecord], path) -> None:
    _write(path, RESULT_COLUMNS, [asdict(r) for r in sorted(records, key=ExperimentRecord.key)])


def write_aggregate_csv(records: Iterable[ExperimentRecord], path) -> None:
    _write(path, AGGREGATE_COLUMNS, aggregate(records))


def write_leakage_csv(rows: Iterable[LeakageRow], path) -> None:
    _write(path, LEAKAGE_COLUMNS, [dict(asdict(r), n_seeds=len(r.deltas)) for r in rows])


def read_results_csv(path) -> list[ExperimentRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RESULT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: results file lacks column(s) {', '.join(missing)}")
        return [
            ExperimentRecord(r["method"], int(r["n_labeled"]), float(r["unlabeled_fraction"]),
                             r["leak"] == "true", int(r["seed"]), float(r["map"]))
            for r in reader
        ]


def with_method(config: MethodConfig, method: str) -> MethodConfig:
    return replace(config, method=method)
