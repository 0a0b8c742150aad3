"""Per-round model training.

Four trainers share one loop: plain cross-entropy ("orig"), the
coefficient curriculum that re-solves the bilevel problem every t2
steps ("chain"), a single pre-training solve with the result held
fixed ("fbr_bo"), and per-round grid search over fixed coefficients
("fbr_gs"). Weights start at zero each round; the objective is convex,
so the start only shapes the path. Early stopping watches validation
cross-entropy every t2 steps and the best checkpoint is returned.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .bilevel import BilevelConfig, solve_lambda
from .data import FeatureDataset, PoolState
from .errors import ConfigurationError, NumericError
from .model import ModelParams, grad, loss, zero_params
from .optim import Adam, Sgd
from .seeding import STREAM_BATCH, STREAM_GRID, STREAM_SOLVE, derive, rng


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 500
    lr: float = 0.001
    main_optimizer: str = "adam"
    batch_fraction: float = 0.1
    early_stop_patience: int = 5
    seed: int = 0
    bilevel: BilevelConfig = field(default_factory=BilevelConfig)

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigurationError("total_steps must be >= 1")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ConfigurationError("batch_fraction must be in (0, 1]")
        if self.lr <= 0:
            raise ConfigurationError("lr must be positive")
        if self.early_stop_patience < 1:
            raise ConfigurationError("early_stop_patience must be >= 1")
        if self.main_optimizer not in ("adam", "sgd_momentum"):
            raise ConfigurationError(f"unknown main optimizer {self.main_optimizer!r}")


@dataclass
class LambdaTrajectory:
    """(training step, coefficient) pairs in the order they took effect."""

    entries: list
    final_lambda: float


@dataclass
class TrainOutcome:
    params: ModelParams
    lambda_traj: LambdaTrajectory
    steps_run: int
    stopped_early: bool
    best_val_loss: float


def _main_optimizer(cfg: TrainConfig):
    if cfg.main_optimizer == "adam":
        return Adam(cfg.lr)
    return Sgd(cfg.lr, momentum=0.9)


def batch_size_for(n_labeled: int, fraction: float) -> int:
    """Batch size tracks the labeled-set size: max(1, floor(fraction * n))."""
    return max(1, int(fraction * n_labeled))


def _train_loop(pool: PoolState, ds: FeatureDataset, cfg: TrainConfig,
                lambda0: float, curriculum: bool) -> TrainOutcome:
    """The shared loop; `curriculum` re-solves the coefficient every t2 steps."""
    labeled = pool.labeled_sorted()
    if labeled.size == 0:
        raise ConfigurationError("cannot train with an empty labeled set")
    x_train, y_train = ds.subset(labeled)
    x_val, y_val = ds.subset(pool.validation_sorted())
    if y_val.size == 0:
        raise ConfigurationError("cannot train with an empty validation set")

    beta = zero_params(ds.num_classes, ds.dim)
    opt = _main_optimizer(cfg)
    lam = float(lambda0)
    t2 = cfg.bilevel.t2
    batch_size = batch_size_for(labeled.size, cfg.batch_fraction)

    entries = []
    best_val = np.inf
    best_beta = beta.copy()
    evals_without_improvement = 0
    stopped_early = False
    steps_run = 0

    for t in range(1, cfg.total_steps + 1):
        steps_run = t
        if curriculum and t % t2 == 0:
            lam, _ = solve_lambda(
                beta, lam, cfg.bilevel, x_train, y_train, x_val, y_val,
                seed=derive(cfg.seed, STREAM_SOLVE, t),
            )
            entries.append((t, lam))
        batch = rng(cfg.seed, STREAM_BATCH, t).choice(
            labeled.size, size=batch_size, replace=False
        )
        g = grad(beta, x_train[batch], y_train[batch])
        beta = ModelParams(opt.step(beta.weights, g.g_ce + lam * g.g_firth))
        if not np.isfinite(beta.weights).all():
            raise NumericError(f"non-finite weights at training step {t} (lambda={lam})")

        if t % t2 == 0 or t == cfg.total_steps:
            val_ce = loss(beta, x_val, y_val, 0.0).ce
            if not np.isfinite(val_ce):
                raise NumericError(f"non-finite validation loss at step {t} (lambda={lam})")
            if val_ce < best_val:
                best_val = val_ce
                best_beta = beta.copy()
                evals_without_improvement = 0
            else:
                evals_without_improvement += 1
                if evals_without_improvement >= cfg.early_stop_patience:
                    stopped_early = True
                    break

    traj = LambdaTrajectory(entries=entries, final_lambda=entries[-1][1] if entries else lam)
    return TrainOutcome(
        params=best_beta,
        lambda_traj=traj,
        steps_run=steps_run,
        stopped_early=stopped_early,
        best_val_loss=float(best_val),
    )


def train_chain(pool: PoolState, ds: FeatureDataset, cfg: TrainConfig) -> TrainOutcome:
    """Curriculum training: re-solve the coefficient every t2 steps,
    warm-starting each solve from the previous one."""
    return _train_loop(pool, ds, cfg, cfg.bilevel.lambda_init, curriculum=True)


def train_fixed_lambda(pool: PoolState, ds: FeatureDataset, cfg: TrainConfig,
                       lam: float) -> TrainOutcome:
    """Same loop with the coefficient held constant (lam=0 is the plain
    cross-entropy baseline)."""
    outcome = _train_loop(pool, ds, cfg, lam, curriculum=False)
    outcome.lambda_traj = LambdaTrajectory(entries=[(0, float(lam))], final_lambda=float(lam))
    return outcome


def train_fbr_bo(pool: PoolState, ds: FeatureDataset, cfg: TrainConfig) -> TrainOutcome:
    """One bilevel solve from the zero weights, then train with the
    result held fixed."""
    x_train, y_train = ds.subset(pool.labeled_sorted())
    x_val, y_val = ds.subset(pool.validation_sorted())
    beta0 = zero_params(ds.num_classes, ds.dim)
    lam, _ = solve_lambda(
        beta0, cfg.bilevel.lambda_init, cfg.bilevel, x_train, y_train, x_val, y_val,
        seed=derive(cfg.seed, STREAM_SOLVE, 0),
    )
    return train_fixed_lambda(pool, ds, cfg, lam)


def train_fbr_gs(pool: PoolState, ds: FeatureDataset, cfg: TrainConfig, grid):
    """Train one model per grid value from scratch and keep the one with
    the lowest validation cross-entropy (ties to the smaller value).

    Arm 0 replays cfg.seed unchanged so a [0.0] grid reproduces the
    plain baseline bit for bit; later arms run on derived seeds.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigurationError("grid must be nonempty")
    best = None
    best_lam = None
    for i, lam in enumerate(grid):
        arm_seed = cfg.seed if i == 0 else derive(cfg.seed, STREAM_GRID, i)
        arm_cfg = dataclasses.replace(cfg, seed=arm_seed)
        outcome = train_fixed_lambda(pool, ds, arm_cfg, lam)
        if (best is None or outcome.best_val_loss < best.best_val_loss
                or (outcome.best_val_loss == best.best_val_loss and lam < best_lam)):
            best = outcome
            best_lam = lam
    return best, best_lam
