"""End-to-end active-learning experiments.

One experiment fixes a query strategy and a trainer kind, then for
each seed: carve the pool, label a random first batch, and alternate
train-from-scratch / query until the budget is spent. Every run is a
pure function of (config, dataset, seed); seeds fan out across worker
processes capped by the CHAIN_THREADS environment variable.
"""

import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureDataset, make_pool, query_commit
from .errors import ConfigurationError
from .model import predict_accuracy
from .query import (STRATEGIES, select_badge, select_coreset, select_entropy,
                    select_random)
from .seeding import (STREAM_POOL, STREAM_QUERY, STREAM_ROUND_ONE,
                      STREAM_TRAIN, derive)
from .trainer import (TrainConfig, train_chain, train_fbr_bo, train_fbr_gs,
                      train_fixed_lambda)

TRAINER_KINDS = ("orig", "chain", "fbr_bo", "fbr_gs")
DEFAULT_GRID = (0.0, 0.01, 0.1, 1.0, 3.0)


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str
    trainer_kind: str
    m: int
    seeds: tuple
    total_budget: int = 500
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: tuple = DEFAULT_GRID
    val_size: int | None = None
    test_size: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.trainer_kind not in TRAINER_KINDS:
            raise ConfigurationError(f"unknown trainer kind {self.trainer_kind!r}")
        if self.m < 1:
            raise ConfigurationError("m must be >= 1")
        if self.total_budget < 1 or self.total_budget % self.m != 0:
            raise ConfigurationError(
                f"total_budget {self.total_budget} must be a positive multiple of m={self.m}"
            )
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))

    @property
    def rounds(self) -> int:
        return self.total_budget // self.m


@dataclass
class RoundRecord:
    round: int
    labeled_count: int
    test_accuracy: float
    val_ce: float
    final_lambda: float
    lambda_traj: list
    wall_ms: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seeds: tuple
    records: list  # one list[RoundRecord] per seed, in cfg.seeds order
    final_accuracy_mean: float
    final_accuracy_std: float


def resolve_split_sizes(cfg: ExperimentConfig, n: int):
    """Defaults: 10% validation, 20% test of the dataset size."""
    val = cfg.val_size if cfg.val_size is not None else max(1, n // 10)
    test = cfg.test_size if cfg.test_size is not None else max(1, n // 5)
    return val, test


def _train_round(cfg: ExperimentConfig, pool, ds, seed: int, round_index: int):
    tcfg = dataclasses.replace(cfg.train, seed=derive(seed, STREAM_TRAIN, round_index))
    if cfg.trainer_kind == "orig":
        return train_fixed_lambda(pool, ds, tcfg, 0.0)
    if cfg.trainer_kind == "chain":
        return train_chain(pool, ds, tcfg)
    if cfg.trainer_kind == "fbr_bo":
        return train_fbr_bo(pool, ds, tcfg)
    outcome, _ = train_fbr_gs(pool, ds, tcfg, cfg.grid)
    return outcome


def _query_next(cfg: ExperimentConfig, params, pool, ds, seed: int, round_index: int):
    if cfg.strategy == "entropy":
        return select_entropy(params, ds, pool, cfg.m)
    if cfg.strategy == "coreset":
        return select_coreset(ds, pool, cfg.m)
    if cfg.strategy == "badge":
        return select_badge(params, ds, pool, cfg.m, seed=derive(seed, STREAM_QUERY, round_index))
    return select_random(pool, cfg.m, seed=derive(seed, STREAM_QUERY, round_index))


def run_seed(cfg: ExperimentConfig, ds: FeatureDataset, seed: int, round_sink=None):
    """All rounds for one seed; returns the list of RoundRecords.

    `round_sink(record)` is invoked as each round completes, which lets
    the CLI flush results incrementally.
    """
    val_size, test_size = resolve_split_sizes(cfg, ds.n)
    pool = make_pool(ds, val_size, test_size, seed=derive(seed, STREAM_POOL))
    if len(pool.unlabeled) < cfg.total_budget:
        raise ConfigurationError(
            f"budget {cfg.total_budget} exceeds the {len(pool.unlabeled)} points available "
            f"after validation/test splits"
        )
    x_test, y_test = ds.subset(pool.test_sorted())

    first = select_random(pool, cfg.m, seed=derive(seed, STREAM_ROUND_ONE))
    pool = query_commit(pool, first)

    records = []
    for r in range(1, cfg.rounds + 1):
        t0 = time.perf_counter()
        outcome = _train_round(cfg, pool, ds, seed, r)
        acc = predict_accuracy(outcome.params, x_test, y_test)
        if r < cfg.rounds:
            selected = _query_next(cfg, outcome.params, pool, ds, seed, r)
            pool = query_commit(pool, selected)
        wall_ms = int(round((time.perf_counter() - t0) * 1e3))
        record = RoundRecord(
            round=r,
            labeled_count=r * cfg.m,
            test_accuracy=acc,
            val_ce=outcome.best_val_loss,
            final_lambda=outcome.lambda_traj.final_lambda,
            lambda_traj=list(outcome.lambda_traj.entries),
            wall_ms=wall_ms,
        )
        records.append(record)
        if round_sink is not None:
            round_sink(record)
    return records


def worker_cap() -> int:
    env = os.environ.get("CHAIN_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigurationError(f"CHAIN_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise ConfigurationError("CHAIN_THREADS must be >= 1")
        return cap
    return os.cpu_count() or 1


def _seed_job(args):
    idx, cfg, ds, seed = args
    return idx, run_seed(cfg, ds, seed)


def run_experiment(cfg: ExperimentConfig, ds: FeatureDataset,
                   workers: int | None = None, round_sink=None) -> ExperimentResult:
    """Run every seed, in parallel when more than one worker is allowed.

    `round_sink(seed, record)` only fires in sequential mode; parallel
    callers stream per-seed output themselves (see the CLI).
    """
    # fail fast on impossible budgets before any training happens
    val_size, test_size = resolve_split_sizes(cfg, ds.n)
    if val_size + test_size >= ds.n:
        raise ConfigurationError("validation + test splits leave no pool")
    if ds.n - val_size - test_size < cfg.total_budget:
        raise ConfigurationError(
            f"budget {cfg.total_budget} exceeds the pool left after splits "
            f"({ds.n - val_size - test_size})"
        )

    effective = workers if workers is not None else min(len(cfg.seeds), worker_cap())
    if effective > 1 and len(cfg.seeds) > 1:
        jobs = [(i, cfg, ds, s) for i, s in enumerate(cfg.seeds)]
        with ProcessPoolExecutor(max_workers=effective) as pool_exec:
            by_idx = dict(pool_exec.map(_seed_job, jobs))
        records = [by_idx[i] for i in range(len(cfg.seeds))]
    else:
        records = []
        for s in cfg.seeds:
            sink = (lambda rec, s=s: round_sink(s, rec)) if round_sink is not None else None
            records.append(run_seed(cfg, ds, s, round_sink=sink))

    finals = np.array([recs[-1].test_accuracy for recs in records])
    std = float(finals.std(ddof=1)) if finals.size > 1 else 0.0
    return ExperimentResult(
        config=cfg,
        seeds=cfg.seeds,
        records=records,
        final_accuracy_mean=float(finals.mean()),
        final_accuracy_std=std,
    )


def paired_t(a, b):
    """Paired t statistic on the differences a - b with dof n - 1.

    Negative values mean b ran ahead of a on average, matching the
    convention used when testing a baseline against an improvement.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("paired_t needs two equal-length vectors with n >= 2")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise ValueError("zero variance of differences; t is undefined")
    n = d.size
    t = float(d.mean() / (sd / np.sqrt(n)))
    return t, n - 1
