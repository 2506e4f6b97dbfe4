"""Device-level trust verdicts.

Super and advanced devices judge a trust vector with their autoencoder;
uncertain cases fall back to recommendations from trusted neighbours.
Generic devices compare a scalar trust value against a threshold aggregated
from their neighbours' recommendations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .autoencoder import (
    AutoencoderModel,
    UntrainedModelError,
    level_from_score,
    reconstruction_errors,
)
from .dataset import TrainingSet, TrustLevel

__all__ = [
    "Verdict",
    "Basis",
    "TrustVerdict",
    "ThresholdRecommendation",
    "TemporaryTrust",
    "decide",
    "decide_batch",
    "synergetic_resolve",
    "recommend_threshold",
    "aggregate_thresholds",
    "generic_decide",
    "MIN_RECOMMENDERS",
    "TEMP_TRUST_ROUNDS",
]

MIN_RECOMMENDERS = 2
TEMP_TRUST_ROUNDS = 5


class Verdict(enum.Enum):
    TRUSTED = "trusted"
    UNCERTAIN = "uncertain"
    UNTRUSTED = "untrusted"


class Basis(enum.Enum):
    RECONSTRUCTION = "reconstruction"
    CLASSIFIER = "classifier"
    SYNERGETIC = "synergetic"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class TrustVerdict:
    verdict: Verdict
    basis: Basis
    round: int | None = None
    expires: int | None = None

    @property
    def trusted(self) -> bool:
        return self.verdict is Verdict.TRUSTED


@dataclass(frozen=True)
class ThresholdRecommendation:
    sender: int
    value: float
    round: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"threshold {self.value} outside [0, 1]")


def _calibrated(model: AutoencoderModel) -> None:
    if not model.trained or model.tau_rec is None:
        raise UntrainedModelError("decisions need a trained, calibrated model")


def decide_batch(model: AutoencoderModel, vectors, round: int | None = None) -> list[TrustVerdict]:
    _calibrated(model)
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    errors = reconstruction_errors(model, X)
    scores = model.trust_disc.predict(X)[:, 1]
    verdicts = []
    for err, score in zip(errors, scores):
        if err > model.tau_rec:
            verdicts.append(TrustVerdict(Verdict.UNTRUSTED, Basis.RECONSTRUCTION, round))
        elif level_from_score(float(score)) is TrustLevel.HIGHER:
            verdicts.append(TrustVerdict(Verdict.TRUSTED, Basis.CLASSIFIER, round))
        else:
            verdicts.append(TrustVerdict(Verdict.UNCERTAIN, Basis.CLASSIFIER, round))
    return verdicts


def decide(model: AutoencoderModel, v, round: int | None = None) -> TrustVerdict:
    """Untrusted when reconstruction fails; otherwise Trusted/Uncertain by class head."""
    return decide_batch(model, np.asarray(getattr(v, "values", v), dtype=float)[None, :], round)[0]


def synergetic_resolve(
    recommendations: Mapping[int, Verdict],
    recommender_trust: Mapping[int, Verdict] | None = None,
    round: int | None = None,
    min_recommenders: int = MIN_RECOMMENDERS,
    temp_rounds: int = TEMP_TRUST_ROUNDS,
) -> TrustVerdict:
    """Resolve an Uncertain target from neighbours' verdicts on it.

    Only recommenders the asker itself currently trusts are counted. With at
    least ``min_recommenders`` of them reporting Trusted, the target is
    trusted temporarily until ``round + temp_rounds``.
    """
    count = 0
    for neighbor, verdict in recommendations.items():
        if recommender_trust is not None and recommender_trust.get(neighbor) is not Verdict.TRUSTED:
            continue
        if verdict is Verdict.TRUSTED:
            count += 1
    if count >= min_recommenders:
        expires = None if round is None else round + temp_rounds
        return TrustVerdict(Verdict.TRUSTED, Basis.SYNERGETIC, round, expires)
    return TrustVerdict(Verdict.UNTRUSTED, Basis.SYNERGETIC, round)


@dataclass
class TemporaryTrust:
    """Synergetic trust grants per target, each valid for a fixed number of rounds."""

    rounds: int = TEMP_TRUST_ROUNDS
    _expiry: dict[int, int] = field(default_factory=dict)

    def grant(self, target: int, round: int) -> None:
        self._expiry[target] = round + self.rounds

    def revoke(self, target: int) -> None:
        self._expiry.pop(target, None)

    def active(self, target: int, round: int) -> bool:
        expiry = self._expiry.get(target)
        if expiry is None:
            return False
        if round >= expiry:
            del self._expiry[target]
            return False
        return True


def recommend_threshold(training_set: TrainingSet | Iterable[float], trim: float = 0.25) -> float:
    """Minimum of the Higher-level trust values left after dropping the lowest quarter."""
    if isinstance(training_set, TrainingSet):
        pool = training_set.higher_vectors().ravel()
    else:
        pool = np.asarray(list(training_set), dtype=float).ravel()
    if pool.size == 0:
        raise ValueError("no Higher-level trust values to recommend from")
    ordered = np.sort(pool)[::-1]
    keep = ordered.size - math.floor(trim * ordered.size)
    return float(ordered[:keep].min())


def _two_means_1d(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Optimal 1-D 2-means split: best contiguous cut of the sorted values."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    best_cost, best_cut = math.inf, None
    for cut in range(1, v.size):
        left, right = v[:cut], v[cut:]
        cost = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        if cost < best_cost - 1e-15:
            best_cost, best_cut = cost, cut
    low = np.zeros(values.size, dtype=bool)
    low[order[:best_cut]] = True
    return low, ~low


def aggregate_thresholds(
    received: Iterable[ThresholdRecommendation | float], gap: float = 0.15
) -> float:
    """Drop an abnormal minority cluster of recommended thresholds, then average."""
    values = np.array(
        [r.value if isinstance(r, ThresholdRecommendation) else float(r) for r in received]
    )
    if values.size == 0:
        raise ValueError("no threshold recommendations")
    if values.size == 1 or np.ptp(values) == 0.0:
        return float(values.mean())
    low, high = _two_means_1d(values)
    lo_center, hi_center = values[low].mean(), values[high].mean()
    if hi_center - lo_center <= gap:
        return float(values.mean())
    if low.sum() < high.sum():
        survivors = values[high]
    elif high.sum() < low.sum():
        survivors = values[low]
    else:
        survivors = values[high]
    return float(survivors.mean())


def generic_decide(value: float, threshold: float) -> Verdict:
    if not (0.0 <= value <= 1.0 and 0.0 <= threshold <= 1.0):
        raise ValueError("trust value and threshold must lie in [0, 1]")
    return Verdict.TRUSTED if value >= threshold else Verdict.UNTRUSTED
