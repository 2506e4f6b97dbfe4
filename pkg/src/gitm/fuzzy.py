"""Interval type-2 fuzzy trust evaluation.

A device's trust value is inferred from three misbehavior rates (dropping,
delaying, tampering) through fuzzifier -> rule inference -> Karnik-Mendel
type reduction -> defuzzification. Timely forwarding is treated as the
complement of the three rates rather than as a fourth input.
"""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

__all__ = [
    "Behavior",
    "BehaviorOutcome",
    "TrustAttributes",
    "Level",
    "Trapezoid",
    "IT2FuzzySet",
    "MembershipInterval",
    "FuzzyRule",
    "TrustValue",
    "FuzzyTrustModel",
    "NoEvidenceError",
    "NoRuleFiredError",
    "NeutralTrustWarning",
    "compute_trust_attributes",
    "fuzzify",
    "fire_rule",
    "type_reduce_km",
    "defuzzify",
    "evaluate_trust",
    "default_sets",
    "build_rule_base",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = 20
NEUTRAL_TRUST = 0.5


class NoEvidenceError(ValueError):
    pass


class NoRuleFiredError(ValueError):
    pass


class NeutralTrustWarning(RuntimeWarning):
    pass


class Behavior(enum.Enum):
    TIMELY = "timely"
    DROP = "drop"
    DELAY = "delay"
    TAMPER = "tamper"


@dataclass(frozen=True)
class BehaviorOutcome:
    kind: Behavior
    round: int = 0


@dataclass(frozen=True)
class TrustAttributes:
    drop_rate: float
    delay_rate: float
    tamper_rate: float

    def __post_init__(self):
        for name in ("drop_rate", "delay_rate", "tamper_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.drop_rate, self.delay_rate, self.tamper_rate)


def compute_trust_attributes(
    window: Sequence[BehaviorOutcome | Behavior], window_len: int = DEFAULT_WINDOW
) -> TrustAttributes:
    """Misbehavior rates over an evidence window of overheard outcomes."""
    n = len(window)
    if n == 0:
        raise NoEvidenceError("no evidence")
    if n > window_len:
        raise ValueError(f"window holds {n} outcomes, limit is {window_len}")
    counts = {Behavior.DROP: 0, Behavior.DELAY: 0, Behavior.TAMPER: 0}
    for item in window:
        kind = item.kind if isinstance(item, BehaviorOutcome) else item
        if kind in counts:
            counts[kind] += 1
    return TrustAttributes(
        counts[Behavior.DROP] / n, counts[Behavior.DELAY] / n, counts[Behavior.TAMPER] / n
    )


class Level(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2


@dataclass(frozen=True)
class Trapezoid:
    """Piecewise-linear membership function rising on [a, b], flat on [b, c], falling on [c, d]."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValueError(f"breakpoints must be non-decreasing: {self}")

    def __call__(self, x: float) -> float:
        if x < self.a or x > self.d:
            return 0.0
        if x < self.b:
            return (x - self.a) / (self.b - self.a)
        if x <= self.c:
            return 1.0
        if self.d == self.c:
            return 1.0
        return (self.d - x) / (self.d - self.c)


@dataclass(frozen=True)
class IT2FuzzySet:
    label: Level
    upper: Trapezoid
    lower: Trapezoid


class MembershipInterval(NamedTuple):
    lower: float
    upper: float


def default_sets() -> dict[Level, IT2FuzzySet]:
    return {
        Level.LOW: IT2FuzzySet(
            Level.LOW, Trapezoid(0.0, 0.0, 0.20, 0.45), Trapezoid(0.0, 0.0, 0.15, 0.35)
        ),
        Level.MEDIUM: IT2FuzzySet(
            Level.MEDIUM, Trapezoid(0.20, 0.45, 0.55, 0.80), Trapezoid(0.30, 0.48, 0.52, 0.70)
        ),
        Level.HIGH: IT2FuzzySet(
            Level.HIGH, Trapezoid(0.55, 0.80, 1.0, 1.0), Trapezoid(0.65, 0.85, 1.0, 1.0)
        ),
    }


def fuzzify(x: float, fset: IT2FuzzySet) -> MembershipInterval:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"attribute value {x} outside [0, 1]")
    return MembershipInterval(fset.lower(x), fset.upper(x))


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[Level, Level, Level]
    consequent: float


DEFAULT_WEIGHTS = (0.35, 0.25, 0.40)
_SEVERITY = {Level.LOW: 0.0, Level.MEDIUM: 0.5, Level.HIGH: 1.0}


def build_rule_base(weights: Sequence[float] = DEFAULT_WEIGHTS) -> list[FuzzyRule]:
    """All 27 antecedent combinations; consequent = 1 - weighted severity."""
    if len(weights) != 3 or any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0):
        raise ValueError("rule weights must be three non-negative values summing to 1")
    rules = []
    for combo in itertools.product(Level, repeat=3):
        severity = sum(w * _SEVERITY[lvl] for w, lvl in zip(weights, combo))
        rules.append(FuzzyRule(combo, 1.0 - severity))
    return rules


def fire_rule(
    rule: FuzzyRule, memberships: Sequence[MembershipInterval]
) -> tuple[MembershipInterval, float]:
    """Minimum t-norm over the three antecedent membership intervals."""
    lo = min(m.lower for m in memberships)
    hi = min(m.upper for m in memberships)
    return MembershipInterval(lo, hi), rule.consequent


def _weighted(ys, weights):
    den = sum(weights)
    if den <= 0.0:
        return None
    return sum(y * w for y, w in zip(ys, weights)) / den


def _km_bound(ys, lo, hi, left: bool, tol: float, max_iter: int = 100) -> float:
    n = len(ys)
    # switch point k: indices <= k take one endpoint, the rest take the other
    y = _weighted(ys, [(a + b) / 2 for a, b in zip(lo, hi)])
    k_prev = None
    for _ in range(max_iter):
        k = 0
        while k < n - 2 and not (ys[k] <= y <= ys[k + 1]):
            k += 1
        if left:
            weights = [hi[i] if i <= k else lo[i] for i in range(n)]
        else:
            weights = [lo[i] if i <= k else hi[i] for i in range(n)]
        y_new = _weighted(ys, weights)
        if y_new is None:
            break
        if k == k_prev or abs(y_new - y) <= tol:
            return y_new
        y, k_prev = y_new, k
    # degenerate denominators: scan every switch point directly
    candidates = []
    for k in range(-1, n):
        if left:
            weights = [hi[i] if i <= k else lo[i] for i in range(n)]
        else:
            weights = [lo[i] if i <= k else hi[i] for i in range(n)]
        value = _weighted(ys, weights)
        if value is not None:
            candidates.append(value)
    return min(candidates) if left else max(candidates)


def type_reduce_km(
    firings: Sequence[MembershipInterval | tuple[float, float]],
    consequents: Sequence[float],
    tol: float = 1e-12,
) -> tuple[float, float]:
    """Karnik-Mendel center-of-sets type reduction to ``(y_left, y_right)``."""
    if len(firings) != len(consequents) or not firings:
        raise ValueError("firings and consequents must be non-empty and of equal length")
    for lo, hi in firings:
        if lo > hi or lo < 0:
            raise ValueError(f"invalid firing interval ({lo}, {hi})")
    active = [(y, f) for y, f in zip(consequents, firings) if f[1] > 0.0]
    if not active:
        raise NoRuleFiredError("no rule fired")
    active.sort(key=lambda item: item[0])
    ys = [y for y, _ in active]
    lo = [f[0] for _, f in active]
    hi = [f[1] for _, f in active]
    if len(ys) == 1:
        return ys[0], ys[0]
    y_left = _km_bound(ys, lo, hi, left=True, tol=tol)
    y_right = _km_bound(ys, lo, hi, left=False, tol=tol)
    return y_left, max(y_left, y_right)


@dataclass(frozen=True)
class TrustValue:
    value: float
    round: int | None = None
    no_rule_fired: bool = False

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"trust value {self.value} outside [0, 1]")

    def __float__(self) -> float:
        return self.value


def defuzzify(interval: tuple[float, float], round: int | None = None) -> TrustValue:
    y_left, y_right = interval
    if y_left > y_right:
        raise ValueError("interval lower bound exceeds upper bound")
    return TrustValue(min(1.0, max(0.0, (y_left + y_right) / 2.0)), round)


@dataclass
class FuzzyTrustModel:
    """Fuzzy sets and rule base; evaluations are memoized on the attribute triple."""

    sets: Mapping[Level, IT2FuzzySet] = field(default_factory=default_sets)
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS

    def __post_init__(self):
        self.rules = build_rule_base(self.weights)
        self._cached = lru_cache(maxsize=65536)(self._evaluate)

    def _evaluate(self, drop: float, delay: float, tamper: float) -> tuple[float, bool]:
        grades = [
            {lvl: fuzzify(x, fset) for lvl, fset in self.sets.items()}
            for x in (drop, delay, tamper)
        ]
        firings, ys = [], []
        for rule in self.rules:
            memberships = [grades[i][lvl] for i, lvl in enumerate(rule.antecedents)]
            firing, y = fire_rule(rule, memberships)
            firings.append(firing)
            ys.append(y)
        try:
            interval = type_reduce_km(firings, ys)
        except NoRuleFiredError:
            return NEUTRAL_TRUST, True
        # 12 decimals: plateaus that are equal in exact arithmetic compare equal
        return round(defuzzify(interval).value, 12), False

    def evaluate(self, attrs: TrustAttributes, round: int | None = None) -> TrustValue:
        value, neutral = self._cached(*attrs.as_tuple())
        if neutral:
            warnings.warn("no rule fired; using neutral trust", NeutralTrustWarning, stacklevel=2)
        return TrustValue(value, round, neutral)


_DEFAULT_MODEL: FuzzyTrustModel | None = None


def evaluate_trust(
    attrs: TrustAttributes, model: FuzzyTrustModel | None = None, round: int | None = None
) -> TrustValue:
    """Run the full IT2 pipeline on one attribute triple."""
    global _DEFAULT_MODEL
    if model is None:
        if _DEFAULT_MODEL is None:
            _DEFAULT_MODEL = FuzzyTrustModel()
        model = _DEFAULT_MODEL
    return model.evaluate(attrs, round)

