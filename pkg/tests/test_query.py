import math

import numpy as np
import pytest

from chain_al import (ConfigurationError, FeatureDataset, ModelParams,
                      PoolState, badge_embeddings, kmeans_pp_select,
                      make_pool, probs, select_badge, select_coreset,
                      select_entropy, select_random, synth_gaussian_mixture,
                      SynthSpec, zero_params)
from chain_al.model import augment, loss


def probe_pool(features, n_unlabeled, num_classes=2, labeled=()):
    """Dataset whose first rows are the unlabeled probes; two spare rows
    serve as validation/test so the pool is well-formed."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    labels = np.arange(n) % num_classes
    ds = FeatureDataset(features, labels, num_classes=num_classes, name="probe")
    rest = set(range(n)) - set(range(n_unlabeled)) - set(labeled)
    rest = sorted(rest)
    pool = PoolState(
        labeled=frozenset(labeled),
        unlabeled=frozenset(range(n_unlabeled)),
        validation=frozenset(rest[: len(rest) // 2]),
        test=frozenset(rest[len(rest) // 2:]),
    )
    return ds, pool


def entropy_of(p):
    p = np.asarray(p)
    return float(-(p[p > 0] * np.log(p[p > 0])).sum())


# --- entropy -----------------------------------------------------------------

def test_entropy_hand_example():
    # predicted rows (.5, .5), (.9, .1), (.6, .4): entropies .6931, .3251,
    # .6730, so m=2 picks indices 0 and 2
    params = ModelParams(np.array([[1.0, 0.0], [0.0, 0.0]]))
    x = np.array([[0.0], [math.log(9.0)], [math.log(1.5)]])
    ds, pool = probe_pool(np.vstack([x, [[5.0]], [[6.0]]]), n_unlabeled=3)
    p = probs(params, x)
    assert np.allclose(p[:, 0], [0.5, 0.9, 0.6])
    assert select_entropy(params, ds, pool, 2) == [0, 2]


def test_entropy_uniform_tie_breaks_to_low_indices():
    ds, pool = probe_pool(np.zeros((6, 2)), n_unlabeled=4)
    picks = select_entropy(zero_params(2, 2), ds, pool, 3)
    assert picks == [0, 1, 2]


def test_entropy_full_unlabeled():
    ds, pool = probe_pool(np.random.default_rng(0).standard_normal((7, 2)), n_unlabeled=5)
    params = ModelParams(np.random.default_rng(1).standard_normal((2, 3)))
    assert sorted(select_entropy(params, ds, pool, 5)) == [0, 1, 2, 3, 4]


def test_entropy_matches_exhaustive_sort():
    gen = np.random.default_rng(2)
    for trial in range(20):
        n = int(gen.integers(4, 15))
        ds, pool = probe_pool(gen.standard_normal((n + 2, 3)), n_unlabeled=n, num_classes=3)
        params = ModelParams(gen.standard_normal((3, 4)))
        m = int(gen.integers(1, n + 1))
        picks = select_entropy(params, ds, pool, m)
        p = probs(params, ds.features[:n])
        ranked = sorted(range(n), key=lambda i: (-entropy_of(p[i]), i))
        assert picks == ranked[:m]


def test_entropy_rejects_oversized_m():
    ds, pool = probe_pool(np.zeros((5, 2)), n_unlabeled=3)
    with pytest.raises(ConfigurationError):
        select_entropy(zero_params(2, 2), ds, pool, 4)


# --- coreset -----------------------------------------------------------------

def brute_force_k_center(ds, pool, m):
    """Independent greedy reimplementation with explicit loops."""
    unlabeled = sorted(pool.unlabeled)
    centers = [ds.features[i] for i in sorted(pool.labeled)]
    selected = []
    for _ in range(m):
        if not centers:
            pick = unlabeled[0]
        else:
            best_idx, best_d = None, -1.0
            for i in unlabeled:
                if i in selected:
                    continue
                d = min(((ds.features[i] - c) ** 2).sum() for c in centers)
                if d > best_d:
                    best_idx, best_d = i, d
            pick = best_idx
        selected.append(pick)
        centers.append(ds.features[pick])
    return selected


def test_coreset_hand_example():
    # labeled point at x=0; unlabeled at 1, 2, 3 (indices 0..2). The far
    # point wins first; then 1 and 2 tie at distance 1 and the smaller
    # index wins.
    ds, pool = probe_pool(np.array([[1.0], [2.0], [3.0], [0.0], [9.0], [9.5]]),
                          n_unlabeled=3, labeled=(3,))
    assert select_coreset(ds, pool, 2) == [2, 0]


def test_coreset_single_pick_is_farthest():
    ds, pool = probe_pool(np.array([[1.0], [5.0], [2.0], [0.0], [9.0], [9.5]]),
                          n_unlabeled=3, labeled=(3,))
    assert select_coreset(ds, pool, 1) == [1]


def test_coreset_empty_labeled_starts_at_smallest_index():
    ds, pool = probe_pool(np.array([[3.0], [0.0], [9.0], [1.0], [2.0]]), n_unlabeled=3)
    picks = select_coreset(ds, pool, 2)
    assert picks[0] == 0
    assert picks == brute_force_k_center(ds, pool, 2)


def test_coreset_matches_brute_force_oracle():
    gen = np.random.default_rng(3)
    for trial in range(25):
        n = int(gen.integers(3, 20))
        n_labeled = int(gen.integers(0, 4))
        feats = gen.standard_normal((n + n_labeled + 2, int(gen.integers(1, 6))))
        labeled = tuple(range(n, n + n_labeled))
        ds, pool = probe_pool(feats, n_unlabeled=n, labeled=labeled)
        m = int(gen.integers(1, n + 1))
        assert select_coreset(ds, pool, m) == brute_force_k_center(ds, pool, m)


# --- badge -------------------------------------------------------------------

def test_badge_embedding_zero_for_saturated_prediction():
    params = ModelParams(np.array([[500.0, 0.0], [-500.0, 0.0]]))
    ds, pool = probe_pool(np.array([[1.0], [2.0], [3.0]]), n_unlabeled=1)
    emb = badge_embeddings(params, ds, pool)
    assert np.all(emb == 0.0)


def test_badge_embedding_norm_identity():
    gen = np.random.default_rng(4)
    params = ModelParams(gen.standard_normal((3, 5)))
    ds, pool = probe_pool(gen.standard_normal((6, 4)), n_unlabeled=4, num_classes=3)
    emb = badge_embeddings(params, ds, pool)
    p = probs(params, ds.features[:4])
    xa = augment(ds.features[:4])
    for i in range(4):
        residual = p[i].copy()
        residual[p[i].argmax()] -= 1.0
        expected = np.linalg.norm(residual) * np.linalg.norm(xa[i])
        assert np.linalg.norm(emb[i]) == pytest.approx(expected, rel=1e-12)


def test_badge_embedding_is_pseudo_label_ce_gradient():
    gen = np.random.default_rng(5)
    params = ModelParams(0.5 * gen.standard_normal((3, 4)))
    ds, pool = probe_pool(gen.standard_normal((5, 3)), n_unlabeled=3, num_classes=3)
    emb = badge_embeddings(params, ds, pool)
    eps = 1e-5
    for i in range(3):
        x_i = ds.features[i:i + 1]
        y_hat = np.array([probs(params, x_i)[0].argmax()])
        fd = np.zeros_like(params.weights)
        for r in range(3):
            for c in range(4):
                wp, wm = params.weights.copy(), params.weights.copy()
                wp[r, c] += eps
                wm[r, c] -= eps
                fd[r, c] = (loss(ModelParams(wp), x_i, y_hat, 0.0).ce
                            - loss(ModelParams(wm), x_i, y_hat, 0.0).ce) / (2 * eps)
        analytic = emb[i].reshape(3, 4)
        assert np.linalg.norm(analytic - fd) <= 1e-5 * np.linalg.norm(fd)


def test_badge_single_pick_and_determinism():
    gen = np.random.default_rng(6)
    params = ModelParams(gen.standard_normal((2, 3)))
    ds, pool = probe_pool(gen.standard_normal((6, 2)), n_unlabeled=4)
    a = select_badge(params, ds, pool, 1, seed=11)
    b = select_badge(params, ds, pool, 1, seed=11)
    assert a == b and len(a) == 1 and a[0] in pool.unlabeled


def test_badge_identical_embeddings_fall_back_to_uniform():
    # zero weights and identical inputs give identical embeddings; after
    # the first pick every squared distance is zero
    ds, pool = probe_pool(np.ones((6, 2)), n_unlabeled=4)
    picks = select_badge(zero_params(2, 2), ds, pool, 3, seed=7)
    assert len(set(picks)) == 3
    assert set(picks) <= pool.unlabeled


def test_kmeans_pp_second_pick_law():
    # squared distances {0, 1, 9} from a forced first center: the law puts
    # mass {0, .1, .9} on the three rows
    emb = np.array([[0.0], [1.0], [3.0]])
    counts = np.zeros(3)
    trials = 4000
    for s in range(trials):
        picks = kmeans_pp_select(emb, 2, np.random.default_rng(s), first=0)
        counts[picks[1]] += 1
    freq = counts / trials
    assert freq[0] == 0.0
    assert abs(freq[1] - 0.1) < 0.02
    assert abs(freq[2] - 0.9) < 0.02


def test_select_badge_conditional_second_pick_law():
    # same law end to end: zero weights make every residual (-.5, .5), so
    # embedding distances are 0.5 * (x_i - x_j)^2; coordinates 0, sqrt(2),
    # sqrt(18) give squared distances {1, 9} from point 0
    x = np.array([[0.0], [math.sqrt(2.0)], [math.sqrt(18.0)], [7.0], [8.0]])
    ds, pool = probe_pool(x, n_unlabeled=3)
    params = zero_params(2, 1)
    counts = np.zeros(3)
    conditioned = 0
    for s in range(6000):
        picks = select_badge(params, ds, pool, 2, seed=s)
        if picks[0] == 0:
            conditioned += 1
            counts[picks[1]] += 1
    freq = counts / conditioned
    assert conditioned > 1500
    assert freq[0] == 0.0
    assert abs(freq[1] - 0.1) < 0.03
    assert abs(freq[2] - 0.9) < 0.03


def test_badge_first_pick_uniform():
    gen = np.random.default_rng(8)
    ds, pool = probe_pool(gen.standard_normal((6, 2)), n_unlabeled=4)
    params = ModelParams(gen.standard_normal((2, 3)))
    counts = np.zeros(4)
    trials = 8000
    for s in range(trials):
        counts[select_badge(params, ds, pool, 1, seed=s)[0]] += 1
    # 3 sigma for a fair 4-way draw
    sigma = math.sqrt(0.25 * 0.75 / trials)
    assert np.all(np.abs(counts / trials - 0.25) < 3.5 * sigma)


# --- random ------------------------------------------------------------------

def test_random_deterministic_and_complete():
    ds, pool = probe_pool(np.zeros((8, 2)), n_unlabeled=6)
    assert select_random(pool, 3, seed=1) == select_random(pool, 3, seed=1)
    assert sorted(select_random(pool, 6, seed=2)) == list(range(6))


def test_random_selection_frequencies():
    ds, pool = probe_pool(np.zeros((12, 2)), n_unlabeled=10)
    m, trials = 3, 10000
    counts = np.zeros(10)
    for s in range(trials):
        for i in select_random(pool, m, seed=s):
            counts[i] += 1
    p = m / 10
    sigma = math.sqrt(p * (1 - p) / trials)
    assert np.all(np.abs(counts / trials - p) <= 3.5 * sigma)


# --- shared invariants ---------------------------------------------------------

def test_all_strategies_return_distinct_unlabeled_indices():
    ds = synth_gaussian_mixture(SynthSpec(3, 4, 2.0, 1.0, 20, seed=1))
    pool = make_pool(ds, 8, 8, seed=2)
    gen = np.random.default_rng(9)
    params = ModelParams(gen.standard_normal((3, 5)))
    m = 7
    for picks in (
        select_entropy(params, ds, pool, m),
        select_coreset(ds, pool, m),
        select_badge(params, ds, pool, m, seed=3),
        select_random(pool, m, seed=4),
    ):
        assert len(picks) == m
        assert len(set(picks)) == m
        assert set(picks) <= pool.unlabeled
