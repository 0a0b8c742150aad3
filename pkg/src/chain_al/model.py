"""Softmax linear classifier with a uniform-KL penalty.

The training objective per example is

    ce + lam * kl(U || P)

where ce is cross-entropy at the true label and kl(U || P) is the
KL divergence from the uniform class distribution to the prediction.
Positive lam pulls predictions toward uniform, negative lam sharpens
them. Gradients and Hessian-vector products are closed-form: both
terms share the softmax curvature diag(p) - p p^T in logit space, the
penalty contributing a factor of lam, so the combined curvature is
(1 + lam) * (diag(p) - p p^T).

Inputs are augmented with a constant 1, so weights have shape
(C, d + 1) with the bias in the last column.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

PROB_FLOOR = 1e-12


@dataclass
class ModelParams:
    """Weight matrix of shape (num_classes, dim + 1); last column is the bias."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(self.weights.copy())


@dataclass(frozen=True)
class LossBreakdown:
    ce: float
    firth_kl: float
    total: float


@dataclass(frozen=True)
class GradPair:
    """Gradient of the objective split by term: g_ce + lam * g_firth."""

    g_ce: np.ndarray
    g_firth: np.ndarray


def zero_params(num_classes: int, dim: int) -> ModelParams:
    return ModelParams(np.zeros((num_classes, dim + 1)))


def augment(x: np.ndarray) -> np.ndarray:
    """Append the constant-1 bias column."""
    x = np.asarray(x, dtype=np.float64)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def probs(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Row-stochastic class probabilities, max-subtracted for stability."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights.shape[1] - 1:
        raise ValueError(
            f"expected {params.weights.shape[1] - 1} feature columns, got shape {x.shape}"
        )
    if not np.isfinite(x).all() or not np.isfinite(params.weights).all():
        raise NumericError("non-finite input to probs")
    logits = augment(x) @ params.weights.T
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def loss(params: ModelParams, x, y, lam: float) -> LossBreakdown:
    """Mean cross-entropy, mean KL(U || P), and their lam-weighted sum."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty batch")
    p = probs(params, x)
    c = params.num_classes
    log_p = np.log(np.maximum(p, PROB_FLOOR))
    ce = -float(np.mean(log_p[np.arange(y.size), y]))
    # KL(U || P) = -ln C - (1/C) sum_k log p_k per row
    kl = float(np.mean(-np.log(c) - log_p.mean(axis=1)))
    return LossBreakdown(ce=ce, firth_kl=kl, total=ce + lam * kl)


def grad(params: ModelParams, x, y) -> GradPair:
    """Closed-form gradients of the mean cross-entropy and penalty terms.

    Logit-space residuals are p - onehot(y) for the cross-entropy and
    p - 1/C for the penalty; each gradient is the batch mean of
    residual times augmented input.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty batch")
    p = probs(params, x)
    xa = augment(x)
    n, c = p.shape
    r_ce = p.copy()
    r_ce[np.arange(n), y] -= 1.0
    r_firth = p - 1.0 / c
    return GradPair(g_ce=r_ce.T @ xa / n, g_firth=r_firth.T @ xa / n)


def hvp(params: ModelParams, x, y, lam: float, v: np.ndarray) -> np.ndarray:
    """Exact Hessian-vector product of the total objective at params.

    Per example the curvature acts on tangent logits u = V x~ as
    (1 + lam) * (p * u - p <p, u>); the result is the batch mean of
    that action times the augmented input.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise NumericError("non-finite tangent in hvp")
    p = probs(params, x)
    xa = augment(x)
    n = p.shape[0]
    u = xa @ v.T
    s = p * u
    a_u = (1.0 + lam) * (s - p * s.sum(axis=1, keepdims=True))
    return a_u.T @ xa / n


def predict_accuracy(params: ModelParams, x, y) -> float:
    """Fraction of rows whose argmax class (ties to the lowest index)
    matches the label."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty batch")
    p = probs(params, x)
    return float(np.mean(p.argmax(axis=1) == y))
