"""Query strategies: entropy, k-center greedy, gradient-embedding
k-means++ seeding, and random.

Each strategy maps (model, pool, dataset, batch size) to a list of
unlabeled dataset indices. Ties always break toward the smaller
dataset index so that every strategy is reproducible and can be
checked against brute-force oracles. In the frozen-feature linear
setting the embedding space for distance-based strategies is the raw
input features.
"""

import numpy as np

from .data import FeatureDataset, PoolState
from .errors import ConfigurationError
from .model import ModelParams, augment, probs
from .seeding import rng

STRATEGIES = ("entropy", "coreset", "badge", "random")


def _check_m(m: int, n_unlabeled: int):
    if m < 0 or m > n_unlabeled:
        raise ConfigurationError(f"cannot select {m} from {n_unlabeled} unlabeled points")


def select_entropy(params: ModelParams, ds: FeatureDataset, pool: PoolState, m: int):
    """The m unlabeled points with the largest predictive entropy."""
    unlabeled = pool.unlabeled_sorted()
    _check_m(m, unlabeled.size)
    p = probs(params, ds.features[unlabeled])
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    entropy = -plogp.sum(axis=1)
    # stable: descending entropy, then ascending dataset index
    order = np.lexsort((unlabeled, -entropy))
    return [int(unlabeled[i]) for i in order[:m]]


def _sq_dists_to(center: np.ndarray, points: np.ndarray) -> np.ndarray:
    return ((points - center) ** 2).sum(axis=1)


def select_coreset(ds: FeatureDataset, pool: PoolState, m: int):
    """k-center greedy over the feature space.

    Each pick maximizes the distance to the nearest labeled or already
    selected point. With no labeled points the first pick is the
    smallest unlabeled index. Distances are kept squared; the argmax
    and all ties are the same as for Euclidean distance.
    """
    unlabeled = pool.unlabeled_sorted()
    _check_m(m, unlabeled.size)
    if m == 0:
        return []
    candidates = ds.features[unlabeled]
    labeled = pool.labeled_sorted()

    min_sq = np.full(unlabeled.size, np.inf)
    for idx in labeled:
        min_sq = np.minimum(min_sq, _sq_dists_to(ds.features[idx], candidates))

    selected = []
    for _ in range(m):
        if labeled.size == 0 and not selected:
            pick = 0
        else:
            pick = int(np.argmax(min_sq))
        selected.append(int(unlabeled[pick]))
        min_sq = np.minimum(min_sq, _sq_dists_to(candidates[pick], candidates))
        min_sq[pick] = -np.inf
    return selected


def badge_embeddings(params: ModelParams, ds: FeatureDataset, pool: PoolState) -> np.ndarray:
    """Per-example cross-entropy gradient at the model's own prediction.

    Row i is vec((p - onehot(argmax p)) x~^T) for the i-th entry of the
    sorted unlabeled set, shape (|unlabeled|, C * (d + 1)).
    """
    unlabeled = pool.unlabeled_sorted()
    x = ds.features[unlabeled]
    p = probs(params, x)
    residual = p.copy()
    residual[np.arange(p.shape[0]), p.argmax(axis=1)] -= 1.0
    xa = augment(x)
    return (residual[:, :, None] * xa[:, None, :]).reshape(p.shape[0], -1)


def kmeans_pp_select(embeddings: np.ndarray, m: int, gen: np.random.Generator,
                     first: int | None = None):
    """k-means++ seeding over embedding rows; returns m row positions.

    The first center is uniform unless forced via `first`; each next
    center is sampled with probability proportional to the squared
    distance to its nearest chosen center. If all remaining mass is
    zero the draw falls back to uniform over the unchosen rows.
    """
    n = embeddings.shape[0]
    if m < 0 or m > n:
        raise ConfigurationError(f"cannot seed {m} centers from {n} rows")
    if m == 0:
        return []
    chosen = [int(gen.integers(n)) if first is None else int(first)]
    min_sq = _sq_dists_to(embeddings[chosen[0]], embeddings)
    for _ in range(m - 1):
        mask = np.ones(n, dtype=bool)
        mask[chosen] = False
        weights = np.where(mask, min_sq, 0.0)
        total = weights.sum()
        if total > 0:
            pick = int(gen.choice(n, p=weights / total))
        else:
            remaining = np.flatnonzero(mask)
            pick = int(remaining[gen.integers(remaining.size)])
        chosen.append(pick)
        min_sq = np.minimum(min_sq, _sq_dists_to(embeddings[pick], embeddings))
    return chosen


def select_badge(params: ModelParams, ds: FeatureDataset, pool: PoolState,
                 m: int, seed: int):
    """k-means++ seeding over the gradient embeddings, seeded."""
    unlabeled = pool.unlabeled_sorted()
    _check_m(m, unlabeled.size)
    emb = badge_embeddings(params, ds, pool)
    positions = kmeans_pp_select(emb, m, rng(seed))
    return [int(unlabeled[i]) for i in positions]


def select_random(pool: PoolState, m: int, seed: int):
    """Uniform draw without replacement from the unlabeled set."""
    unlabeled = pool.unlabeled_sorted()
    _check_m(m, unlabeled.size)
    picks = rng(seed).choice(unlabeled.size, size=m, replace=False)
    return [int(unlabeled[i]) for i in picks]
