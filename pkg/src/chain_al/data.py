"""Datasets, pool bookkeeping, and synthetic mixtures for desk-scale runs.

The pool tracks four disjoint index sets over one feature dataset:
labeled, unlabeled, validation, test. All operations are pure and
return new values; nothing here mutates shared state.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, LogicError
from .seeding import rng


@dataclass(frozen=True)
class FeatureDataset:
    """N x d feature matrix with integer labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError(f"features must be a nonempty 2-D matrix, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be a vector with one entry per feature row")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not np.isfinite(features).all():
            raise ValueError("features contain non-finite values")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices):
        """Feature rows and labels for the given dataset indices."""
        idx = np.asarray(sorted(indices), dtype=np.int64)
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True)
class PoolState:
    """Disjoint labeled / unlabeled / validation / test index sets."""

    labeled: frozenset
    unlabeled: frozenset
    validation: frozenset
    test: frozenset

    def __post_init__(self):
        sets = (self.labeled, self.unlabeled, self.validation, self.test)
        total = sum(len(s) for s in sets)
        if len(frozenset().union(*sets)) != total:
            raise LogicError("pool index sets must be pairwise disjoint")
        if any((min(s, default=0)) < 0 for s in sets):
            raise LogicError("pool indices must be nonnegative")

    def labeled_sorted(self) -> np.ndarray:
        return np.asarray(sorted(self.labeled), dtype=np.int64)

    def unlabeled_sorted(self) -> np.ndarray:
        return np.asarray(sorted(self.unlabeled), dtype=np.int64)

    def validation_sorted(self) -> np.ndarray:
        return np.asarray(sorted(self.validation), dtype=np.int64)

    def test_sorted(self) -> np.ndarray:
        return np.asarray(sorted(self.test), dtype=np.int64)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for an isotropic Gaussian mixture; generation is a pure
    function of the spec (same spec, same bytes)."""

    num_classes: int
    dim: int
    class_separation: float
    within_class_stddev: float
    points_per_class: int
    seed: int

    def __post_init__(self):
        if self.num_classes < 2 or self.dim < 1 or self.points_per_class < 1:
            raise ConfigurationError("num_classes, dim, points_per_class must be positive (classes >= 2)")
        if not self.class_separation > 0:
            raise ConfigurationError("class_separation must be > 0")
        if self.within_class_stddev < 0:
            raise ConfigurationError("within_class_stddev must be >= 0")


def make_pool(ds: FeatureDataset, val_size: int, test_size: int, seed: int) -> PoolState:
    """Carve seeded validation and test splits; the rest starts unlabeled.

    Raises ConfigurationError when the requested splits do not leave at
    least one unlabeled point.
    """
    if val_size < 0 or test_size < 0:
        raise ConfigurationError("split sizes must be nonnegative")
    if val_size + test_size >= ds.n:
        raise ConfigurationError(
            f"val_size + test_size = {val_size + test_size} must be < dataset size {ds.n}"
        )
    perm = rng(seed).permutation(ds.n)
    validation = frozenset(int(i) for i in perm[:val_size])
    test = frozenset(int(i) for i in perm[val_size:val_size + test_size])
    unlabeled = frozenset(int(i) for i in perm[val_size + test_size:])
    return PoolState(labeled=frozenset(), unlabeled=unlabeled, validation=validation, test=test)


def cluster_means(spec: SynthSpec) -> np.ndarray:
    """Deterministic means: class c sits at separation * e_{c mod d} * (1 + c // d)."""
    means = np.zeros((spec.num_classes, spec.dim))
    for c in range(spec.num_classes):
        means[c, c % spec.dim] = spec.class_separation * (1 + c // spec.dim)
    return means


def synth_gaussian_mixture(spec: SynthSpec) -> FeatureDataset:
    """C isotropic Gaussian clusters, labels equal to the cluster id."""
    means = cluster_means(spec)
    gen = rng(spec.seed)
    blocks = []
    for c in range(spec.num_classes):
        noise = gen.standard_normal((spec.points_per_class, spec.dim))
        blocks.append(means[c] + spec.within_class_stddev * noise)
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(spec.num_classes), spec.points_per_class)
    name = f"synth_c{spec.num_classes}_d{spec.dim}_s{spec.seed}"
    return FeatureDataset(features=features, labels=labels, num_classes=spec.num_classes, name=name)


def query_commit(pool: PoolState, selected) -> PoolState:
    """Move the selected indices from unlabeled to labeled.

    The oracle is simulated: labels are already present in the dataset
    and become usable once an index is labeled. Selecting anything not
    currently unlabeled is a LogicError and aborts the run.
    """
    selected = [int(i) for i in selected]
    if len(set(selected)) != len(selected):
        raise LogicError("duplicate indices in query selection")
    chosen = frozenset(selected)
    if not chosen <= pool.unlabeled:
        bad = sorted(chosen - pool.unlabeled)
        raise LogicError(f"selected indices not in unlabeled set: {bad}")
    return PoolState(
        labeled=pool.labeled | chosen,
        unlabeled=pool.unlabeled - chosen,
        validation=pool.validation,
        test=pool.test,
    )
