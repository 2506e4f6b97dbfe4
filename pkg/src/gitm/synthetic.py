"""Synthetic trust-vector generators for the three trust levels."""

from __future__ import annotations

import numpy as np

from .dataset import TrainingSet, TrustLevel

__all__ = ["LEVEL_DISTRIBUTIONS", "level_vectors", "mixed_training_set"]

# (mean, std) of the per-entry trust value, clipped to [0, 1]
LEVEL_DISTRIBUTIONS = {
    TrustLevel.HIGHER: (0.9, 0.05),
    TrustLevel.MEDIUM: (0.65, 0.07),
    TrustLevel.LOWER: (0.3, 0.1),
}


def level_vectors(level: TrustLevel, n: int, length: int = 10, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    mean, std = LEVEL_DISTRIBUTIONS[TrustLevel(level)]
    return np.clip(rng.normal(mean, std, size=(n, length)), 0.0, 1.0)


def mixed_training_set(
    n: int, higher_fraction: float = 0.5, length: int = 10, rng=None
) -> TrainingSet:
    """Shuffled Higher/Medium mixture with ``round(n * higher_fraction)`` Higher rows."""
    rng = np.random.default_rng(rng)
    n_high = int(round(n * higher_fraction))
    X = np.vstack(
        [level_vectors(TrustLevel.HIGHER, n_high, length, rng),
         level_vectors(TrustLevel.MEDIUM, n - n_high, length, rng)]
    )
    levels = np.array([TrustLevel.HIGHER] * n_high + [TrustLevel.MEDIUM] * (n - n_high), dtype=int)
    order = rng.permutation(n)
    return TrainingSet(X[order], levels[order])
