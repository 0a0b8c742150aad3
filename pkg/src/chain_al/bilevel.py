"""Online tuning of the penalty coefficient by bilevel optimization.

The outer objective is the validation cross-entropy of the weights
reached after a short SGD unroll of the penalized training loss. The
derivative with respect to the scalar coefficient is propagated
forward alongside the unroll:

    beta_{t+1} = beta_t - eta * (g_ce(beta_t) + lam * g_firth(beta_t))
    v_{t+1}    = v_t    - eta * (H(beta_t, lam) v_t + g_firth(beta_t))

with v_0 = 0, where H is the Hessian of the total loss. For a single
scalar hyperparameter this forward-mode tangent is exactly the
derivative of the unrolled trajectory, needs no tape, and keeps memory
at one extra weight matrix. The inner optimizer is plain SGD so the
per-step Jacobian stays I - eta * H.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .model import ModelParams, grad, hvp
from .optim import Adam, Sgd
from .seeding import STREAM_SOLVE_SCHEDULE, derive, rng

# Unrolls over sets up to this size replay the full batch every step,
# which keeps finite-difference checks exactly reproducible.
FULL_BATCH_LIMIT = 256
MINIBATCH_FRACTION = 0.1


@dataclass(frozen=True)
class BilevelConfig:
    t1: int = 1
    t2: int = 5
    inner_lr: float = 0.01
    outer_lr: float = 0.05
    outer_optimizer: str = "adam"
    lambda_init: float = 0.0

    def __post_init__(self):
        if self.t1 < 0 or self.t2 < 1:
            raise ConfigurationError("t1 must be >= 0 and t2 >= 1")
        if self.inner_lr <= 0 or self.outer_lr <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.outer_optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown outer optimizer {self.outer_optimizer!r}")


@dataclass
class TangentState:
    """d(weights)/d(lam) along the unrolled trajectory."""

    v: np.ndarray


@dataclass(frozen=True)
class BatchSchedule:
    """Fixed minibatch sequence; primal and tangent replay it identically."""

    batches: tuple
    seed: int

    def __len__(self):
        return len(self.batches)


def make_schedule(n_examples: int, t2: int, seed: int) -> BatchSchedule:
    """One batch of row indices per inner step.

    Full batch when the set is small (<= FULL_BATCH_LIMIT), else seeded
    draws of size max(1, floor(0.1 * n)) without replacement per step.
    """
    if n_examples < 1:
        raise ConfigurationError("schedule needs at least one example")
    if n_examples <= FULL_BATCH_LIMIT:
        batch = np.arange(n_examples, dtype=np.int64)
        return BatchSchedule(batches=tuple([batch] * t2), seed=seed)
    gen = rng(seed)
    size = max(1, int(MINIBATCH_FRACTION * n_examples))
    batches = tuple(np.sort(gen.choice(n_examples, size=size, replace=False)) for _ in range(t2))
    return BatchSchedule(batches=batches, seed=seed)


def inner_unroll_with_tangent(beta0: ModelParams, lam: float, sched: BatchSchedule,
                              cfg: BilevelConfig, x, y):
    """Run the SGD unroll from a copy of beta0, carrying the tangent.

    Returns (final params, tangent state). beta0 is not modified.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    beta = beta0.weights.copy()
    v = np.zeros_like(beta)
    eta = cfg.inner_lr
    for step, batch in enumerate(sched.batches):
        params = ModelParams(beta)
        xb, yb = x[batch], y[batch]
        g = grad(params, xb, yb)
        hv = hvp(params, xb, yb, lam, v)
        v = v - eta * (hv + g.g_firth)
        beta = beta - eta * (g.g_ce + lam * g.g_firth)
        if not (np.isfinite(beta).all() and np.isfinite(v).all()):
            raise NumericError(f"inner unroll diverged at step {step} (lambda={lam})")
    return ModelParams(beta), TangentState(v=v)


def hypergradient(beta0: ModelParams, lam: float, sched: BatchSchedule,
                  cfg: BilevelConfig, x, y, x_val, y_val) -> float:
    """d(validation cross-entropy)/d(lam) through the unrolled trajectory.

    The outer objective is cross-entropy only, so the chain rule
    reduces to the inner product of the validation CE gradient at the
    unrolled weights with the tangent.
    """
    y_val = np.asarray(y_val, dtype=np.int64)
    if y_val.size == 0:
        raise ConfigurationError("validation batch is empty")
    beta_t, tangent = inner_unroll_with_tangent(beta0, lam, sched, cfg, x, y)
    g_val = grad(beta_t, x_val, y_val).g_ce
    return float(np.sum(g_val * tangent.v))


def _outer_optimizer(cfg: BilevelConfig):
    if cfg.outer_optimizer == "adam":
        return Adam(cfg.outer_lr)
    return Sgd(cfg.outer_lr)


def solve_lambda(beta_current: ModelParams, lambda_init: float, cfg: BilevelConfig,
                 x, y, x_val, y_val, seed: int):
    """Run t1 outer steps of coefficient descent from lambda_init.

    Every outer step draws a fresh schedule, unrolls t2 inner steps
    from a scratch copy of beta_current, and feeds the hypergradient
    to the outer optimizer. beta_current is never mutated and the
    coefficient is unconstrained (negative values are legitimate).

    Returns (final lambda, trace of (outer step, lambda, hypergradient)).
    """
    lam = float(lambda_init)
    opt = _outer_optimizer(cfg)
    trace = []
    n = np.asarray(y).shape[0]
    for tau in range(cfg.t1):
        sched = make_schedule(n, cfg.t2, seed=derive(seed, STREAM_SOLVE_SCHEDULE, tau))
        g = hypergradient(beta_current, lam, sched, cfg, x, y, x_val, y_val)
        lam = float(opt.step(lam, g))
        if not np.isfinite(lam):
            raise NumericError(f"lambda became non-finite at outer step {tau}")
        trace.append((tau + 1, lam, g))
    return lam, trace
