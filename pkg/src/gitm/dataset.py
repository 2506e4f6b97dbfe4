"""Labelled training data from raw trust vectors: PCA features, 3-means, trust levels."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TrustLevel",
    "TrustVector",
    "PcaModel",
    "KMeansResult",
    "LabeledDataset",
    "TrainingSet",
    "ZeroVarianceError",
    "pca_fit",
    "pca_transform",
    "kmeans_cluster",
    "label_levels",
    "build_training_set",
    "prepare_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "DEFAULT_VECTOR_LEN",
    "MIN_TRAINING_VECTORS",
]

DEFAULT_VECTOR_LEN = 10
MIN_TRAINING_VECTORS = 300


class ZeroVarianceError(ValueError):
    pass


class TrustLevel(enum.IntEnum):
    LOWER = 0
    MEDIUM = 1
    HIGHER = 2

    @property
    def code(self) -> str:
        return "LMH"[self.value]

    @classmethod
    def from_code(cls, code: str) -> "TrustLevel":
        return cls("LMH".index(code))


@dataclass(frozen=True)
class TrustVector:
    """Consecutive trust values of one device, oldest first."""

    device_id: int
    values: np.ndarray
    end_round: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("trust vector must be one-dimensional")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("trust values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        X = vectors.astype(float, copy=False)
    else:
        X = np.array([getattr(v, "values", v) for v in vectors], dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D collection of vectors")
    return X


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def pca_fit(vectors, variance_target: float = 0.90, max_components: int = 5) -> PcaModel:
    """Principal axes keeping the fewest components that reach ``variance_target``."""
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must lie in (0, 1]")
    X = _as_matrix(vectors)
    if np.unique(X, axis=0).shape[0] < 2:
        if X.shape[0] >= 2:
            raise ZeroVarianceError("zero variance")
        raise ValueError("need at least two distinct vectors")
    mean = X.mean(axis=0)
    Xc = X - mean
    # right singular vectors of the centred data are covariance eigenvectors
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s**2
    total = var.sum()
    if total <= 0.0:
        raise ZeroVarianceError("zero variance")
    ratios = var / total
    cumulative = np.cumsum(ratios)
    d = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    d = max(1, min(d, max_components, vt.shape[0]))
    components = vt[:d].copy()
    # deterministic orientation: largest-magnitude loading positive
    for row in components:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    return PcaModel(mean, components, ratios[:d].copy())


def pca_transform(model: PcaModel, v) -> np.ndarray:
    x = np.asarray(getattr(v, "values", v), dtype=float)
    if x.shape[-1] != model.mean.size:
        raise ValueError(f"vector length {x.shape[-1]} does not match PCA input {model.mean.size}")
    return (x - model.mean) @ model.components.T


@dataclass
class KMeansResult:
    assignments: np.ndarray
    means: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)
    iterations: int = 0


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [X[rng.integers(X.shape[0])]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(X.shape[0])
        else:
            idx = rng.choice(X.shape[0], p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _sq_dists(X, means):
    return ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)


def _lloyd(X, means, max_iter):
    k = means.shape[0]
    history = []
    assign = None
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, means)
        new_assign = d2.argmin(axis=1)
        history.append(float(d2[np.arange(X.shape[0]), new_assign].sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            return assign, means, history, it
        assign = new_assign
        means = means.copy()
        for j in range(k):
            members = X[assign == j]
            if members.shape[0]:
                means[j] = members.mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its mean
                far = d2[np.arange(X.shape[0]), assign].argmax()
                means[j] = X[far]
                assign[far] = j
    d2 = _sq_dists(X, means)
    assign = d2.argmin(axis=1)
    history.append(float(d2[np.arange(X.shape[0]), assign].sum()))
    return assign, means, history, max_iter


def kmeans_cluster(
    features, k: int = 3, seed: int = 0, max_iter: int = 300, n_init: int = 10
) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` restarts."""
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if np.unique(X, axis=0).shape[0] < k:
        raise ValueError(f"need at least {k} distinct points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        means = _kmeans_pp(X, k, rng)
        assign, means, history, iters = _lloyd(X, means, max_iter)
        inertia = history[-1]
        if best is None or inertia < best.inertia - 1e-12:
            best = KMeansResult(assign, means, inertia, history, iters)
    return best


@dataclass
class LabeledDataset:
    vectors: np.ndarray
    levels: np.ndarray
    device_ids: np.ndarray
    rounds: np.ndarray
    cluster_means: np.ndarray | None = None
    cluster_levels: np.ndarray | None = None
    pca: PcaModel | None = None

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def counts(self) -> dict[TrustLevel, int]:
        return {lvl: int(np.sum(self.levels == lvl)) for lvl in TrustLevel}

    def relabel(self, vectors) -> np.ndarray:
        """Levels for new vectors from the stored PCA model and cluster means."""
        if self.pca is None or self.cluster_means is None:
            raise ValueError("dataset carries no clustering model")
        feats = np.atleast_2d(pca_transform(self.pca, _as_matrix(np.atleast_2d(vectors))))
        nearest = _sq_dists(feats, self.cluster_means).argmin(axis=1)
        return self.cluster_levels[nearest]


def label_levels(assignments, vectors, means=None) -> tuple[np.ndarray, np.ndarray]:
    """Map cluster indices to trust levels by member-average trust.

    Returns ``(levels per vector, level per cluster)``. Ties rank the larger
    cluster higher, then the smaller cluster index.
    """
    assignments = np.asarray(assignments)
    X = _as_matrix(vectors)
    k = int(assignments.max()) + 1 if assignments.size else 0
    if k != 3 or any(np.sum(assignments == j) == 0 for j in range(3)):
        raise ValueError("labelling needs three non-empty clusters")
    keys = []
    for j in range(3):
        members = X[assignments == j]
        keys.append((-float(members.mean(axis=1).mean()), -members.shape[0], j))
    ranked = [j for *_, j in sorted(keys)]
    cluster_levels = np.empty(3, dtype=int)
    for level, j in zip((TrustLevel.HIGHER, TrustLevel.MEDIUM, TrustLevel.LOWER), ranked):
        cluster_levels[j] = level
    return cluster_levels[assignments], cluster_levels


@dataclass
class TrainingSet:
    """Higher- and Medium-level vectors, oldest first."""

    vectors: np.ndarray
    levels: np.ndarray
    device_ids: np.ndarray | None = None
    rounds: np.ndarray | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.levels = np.asarray(self.levels, dtype=int)
        if np.any(self.levels == TrustLevel.LOWER):
            raise ValueError("training set cannot hold Lower-level vectors")
        if self.vectors.shape[0] != self.levels.shape[0]:
            raise ValueError("vectors and levels differ in length")

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def counts(self) -> dict[TrustLevel, int]:
        return {lvl: int(np.sum(self.levels == lvl)) for lvl in (TrustLevel.HIGHER, TrustLevel.MEDIUM)}

    def higher_vectors(self) -> np.ndarray:
        return self.vectors[self.levels == TrustLevel.HIGHER]

    def extend(self, vectors, levels) -> "TrainingSet":
        return TrainingSet(np.vstack([self.vectors, vectors]), np.concatenate([self.levels, levels]))

    def tail(self, cap: int) -> "TrainingSet":
        if len(self) <= cap:
            return self
        return TrainingSet(self.vectors[-cap:], self.levels[-cap:])


def build_training_set(dataset: LabeledDataset) -> TrainingSet:
    keep = dataset.levels != TrustLevel.LOWER
    if not np.any(dataset.levels == TrustLevel.HIGHER):
        raise ValueError("cannot train: no Higher-level vectors")
    return TrainingSet(
        dataset.vectors[keep], dataset.levels[keep], dataset.device_ids[keep], dataset.rounds[keep]
    )


def prepare_dataset(
    vectors,
    device_ids: Sequence[int] | None = None,
    rounds: Sequence[int] | None = None,
    variance_target: float = 0.90,
    max_components: int = 5,
    seed: int = 0,
) -> LabeledDataset:
    """PCA features -> 3-means -> trust levels for every vector."""
    X = _as_matrix(vectors)
    n = X.shape[0]
    pca = pca_fit(X, variance_target, max_components)
    feats = pca_transform(pca, X)
    result = kmeans_cluster(feats, 3, seed)
    levels, cluster_levels = label_levels(result.assignments, X)
    return LabeledDataset(
        X,
        levels,
        np.asarray(device_ids if device_ids is not None else np.full(n, -1), dtype=int),
        np.asarray(rounds if rounds is not None else np.zeros(n), dtype=int),
        result.means,
        cluster_levels,
        pca,
    )


def write_dataset_csv(path, vectors, levels=None, device_ids=None, rounds=None) -> None:
    """One row per vector: ``v1..vL, label (H/M/L or empty), device_id, round``."""
    X = _as_matrix(vectors)
    n, L = X.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"v{i + 1}" for i in range(L)] + ["label", "device_id", "round"])
        for i in range(n):
            label = "" if levels is None else TrustLevel(int(levels[i])).code
            dev = -1 if device_ids is None else int(device_ids[i])
            rnd = 0 if rounds is None else int(rounds[i])
            writer.writerow([repr(float(v)) for v in X[i]] + [label, dev, rnd])


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray | None, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_dataset_csv`; levels are ``None`` when no row is labelled."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        L = sum(1 for h in header if h.startswith("v") and h[1:].isdigit())
        if header[L:] != ["label", "device_id", "round"]:
            raise ValueError(f"unexpected dataset header {header}")
        rows = list(reader)
    X = np.array([[float(v) for v in r[:L]] for r in rows]).reshape(len(rows), L)
    labels = [r[L] for r in rows]
    levels = None
    if any(labels):
        if not all(labels):
            raise ValueError("dataset mixes labelled and unlabelled rows")
        levels = np.array([TrustLevel.from_code(c) for c in labels], dtype=int)
    ids = np.array([int(r[L + 1]) for r in rows], dtype=int)
    rnds = np.array([int(r[L + 2]) for r in rows], dtype=int)
    return X, levels, ids, rnds
