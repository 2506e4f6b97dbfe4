"""Discrete-round simulation of trusted clustering with overhearing-based trust.

Each round: head election, trust-filtered cluster joining, TDMA uplink to the
heads, aggregated forwarding to the base station (where heads may misbehave),
evidence collection by every device that overhears a head, and model
training/updates on super and advanced devices.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import autoencoder as ae
from .config import ScenarioConfig
from .dataset import TrainingSet, TrustLevel, build_training_set, prepare_dataset
from .decision import (
    TemporaryTrust,
    Verdict,
    aggregate_thresholds,
    decide_batch,
    generic_decide,
    recommend_threshold,
)
from .fuzzy import NEUTRAL_TRUST, Behavior, FuzzyTrustModel, TrustAttributes

__all__ = [
    "Role",
    "Capability",
    "Device",
    "RadioModel",
    "NetworkState",
    "RoundEvents",
    "JoinChoice",
    "Candidate",
    "SELF_HEAD",
    "DIRECT",
    "head_threshold",
    "elect_heads",
    "join_cluster",
    "apply_behavior",
    "create_network",
    "run_round",
]


class Role(enum.Enum):
    SUPER = "super"
    ADVANCED = "advanced"
    GENERIC = "generic"


class Capability(enum.Enum):
    HIGHER = "higher"
    MEDIUM = "medium"
    LOWER = "lower"


_KIND_CODES = (Behavior.TIMELY, Behavior.DROP, Behavior.DELAY, Behavior.TAMPER)
_MISBEHAVIORS = (Behavior.DROP, Behavior.DELAY, Behavior.TAMPER)
_FAULTS = (Behavior.DROP, Behavior.DELAY)


@dataclass(frozen=True)
class RadioModel:
    """First-order radio: electronics cost plus free-space or multipath amplifier."""

    e_elec: float = 50e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12

    @property
    def d0(self) -> float:
        return math.sqrt(self.eps_fs / self.eps_mp)

    def energy_tx(self, bits: int, distance: float) -> float:
        if bits <= 0 or distance < 0:
            raise ValueError("bits must be positive and distance non-negative")
        if distance < self.d0:
            return bits * self.e_elec + bits * self.eps_fs * distance**2
        return bits * self.e_elec + bits * self.eps_mp * distance**4

    def energy_rx(self, bits: int) -> float:
        if bits <= 0:
            raise ValueError("bits must be positive")
        return bits * self.e_elec


@dataclass
class Device:
    id: int
    x: float
    y: float
    role: Role
    capability: Capability | None = None
    energy: float = 1.3
    alive: bool = True
    last_head: int | None = None
    neighbors: tuple[int, ...] = ()
    # monitoring state, keyed by the monitored device id
    evidence: dict[int, deque] = field(default_factory=dict)
    history: dict[int, deque] = field(default_factory=dict)
    versions: dict[int, int] = field(default_factory=dict)
    collected: list = field(default_factory=list)
    # decision state
    model: ae.AutoencoderModel | None = None
    model_version: int = 0
    training_set: TrainingSet | None = None
    buffer: ae.EligibilityBuffer | None = None
    tested: dict[int, int] = field(default_factory=dict)
    pending: list = field(default_factory=list)
    temp_trust: TemporaryTrust = field(default_factory=TemporaryTrust)
    recommendations: dict[int, float] = field(default_factory=dict)
    threshold: float | None = None
    verdict_cache: dict[int, tuple] = field(default_factory=dict)

    @property
    def malicious(self) -> bool:
        return self.capability is not None

    @property
    def has_model(self) -> bool:
        return self.model is not None and self.model.calibrated

    def eligible(self, r: int, period: int) -> bool:
        # one elected turn per epoch of ``period`` rounds
        return self.last_head is None or self.last_head // period < r // period

    def current_vector(self, target: int, length: int) -> np.ndarray | None:
        hist = self.history.get(target)
        if hist is None or len(hist) < length:
            return None
        return np.fromiter(hist, dtype=float, count=length)

    def latest_trust(self, target: int) -> float | None:
        hist = self.history.get(target)
        return hist[-1] if hist else None


class Candidate(NamedTuple):
    head: int
    distance: float
    trusted: bool


class JoinChoice(NamedTuple):
    head: int | None
    kind: str  # "member", "self_head" or "direct"


SELF_HEAD = "self_head"
DIRECT = "direct"


def join_cluster(candidates: Sequence[Candidate], eligible: bool) -> JoinChoice:
    """Nearest trusted head (ties to the lower id); otherwise act as head or go direct."""
    trusted = [c for c in candidates if c.trusted]
    if trusted:
        best = min(trusted, key=lambda c: (c.distance, c.head))
        return JoinChoice(best.head, "member")
    return JoinChoice(None, SELF_HEAD if eligible else DIRECT)


def head_threshold(p: float, r: int) -> float:
    period = int(math.floor(1.0 / p))
    return p / (1.0 - p * (r % period))


def apply_behavior(device: Device, rng: np.random.Generator, config: ScenarioConfig) -> Behavior | None:
    """Outcome of one forwarded packet: malicious misbehaviour, random fault, or timely."""
    if not device.alive:
        return None
    if device.malicious:
        p = {
            Capability.HIGHER: config.p_attack_higher,
            Capability.MEDIUM: config.p_attack_medium,
            Capability.LOWER: config.p_attack_lower,
        }[device.capability]
        if rng.random() < p:
            return _MISBEHAVIORS[rng.integers(3)]
        return Behavior.TIMELY
    if rng.random() < config.fault_rate:
        return _FAULTS[rng.integers(2)]
    return Behavior.TIMELY


@dataclass
class RoundEvents:
    round: int
    heads: list[int] = field(default_factory=list)
    members: dict[int, int] = field(default_factory=dict)
    direct: list[int] = field(default_factory=list)
    delivered: int = 0
    sent: int = 0
    forwarded: int = 0
    attacks: int = 0
    deaths: list[int] = field(default_factory=list)
    log: list[tuple] = field(default_factory=list)

    def add(self, kind: str, actor, target="", value=""):
        self.log.append((self.round, kind, actor, target, value))


@dataclass
class NetworkState:
    config: ScenarioConfig
    devices: list[Device]
    base: tuple[float, float]
    rng: np.random.Generator
    radio: RadioModel
    fuzzy: FuzzyTrustModel
    distances: np.ndarray
    base_distances: np.ndarray
    round: int = 0
    initial_energy: float = 0.0
    energy_consumed: float = 0.0
    clusters: dict[int, list[int]] = field(default_factory=dict)
    train_stats: list = field(default_factory=list)
    _trust_cache: dict = field(default_factory=dict)

    @property
    def alive(self) -> list[Device]:
        return [d for d in self.devices if d.alive]

    def residual_energy(self) -> float:
        return float(sum(d.energy for d in self.devices))

    def spend(self, device: Device, joules: float) -> bool:
        """Charge ``device``; when it cannot pay, it spends what is left and the action fails."""
        if device.energy >= joules:
            device.energy -= joules
            self.energy_consumed += joules
            return True
        self.energy_consumed += device.energy
        device.energy = 0.0
        return False

    def trust_from_counts(self, drop: int, delay: int, tamper: int, n: int) -> float:
        key = (drop, delay, tamper, n)
        value = self._trust_cache.get(key)
        if value is None:
            attrs = TrustAttributes(drop / n, delay / n, tamper / n)
            value = self.fuzzy.evaluate(attrs).value
            self._trust_cache[key] = value
        return value


def _split_counts(total: int, percentages: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` items by percentage."""
    raw = [total * p / 100.0 for p in percentages]
    counts = [int(math.floor(x)) for x in raw]
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in remainders[: total - sum(counts)]:
        counts[i] += 1
    return counts


def create_network(config: ScenarioConfig) -> NetworkState:
    rng = np.random.default_rng(config.seed)
    n = config.device_count
    pos = rng.uniform(0.0, config.field_size, size=(n, 2))
    role_counts = _split_counts(n, (config.role_super, config.role_advanced, config.role_generic))
    role_order = rng.permutation(n)
    roles = np.empty(n, dtype=object)
    start = 0
    for role, count in zip(Role, role_counts):
        roles[role_order[start : start + count]] = role
        start += count
    n_mal = int(round(n * config.malicious_pct / 100.0))
    cap_counts = _split_counts(n_mal, (config.cap_higher, config.cap_medium, config.cap_lower))
    mal_order = rng.permutation(n)[:n_mal]
    caps: dict[int, Capability] = {}
    start = 0
    for cap, count in zip(Capability, cap_counts):
        for i in mal_order[start : start + count]:
            caps[int(i)] = cap
        start += count
    diff = pos[:, None, :] - pos[None, :, :]
    distances = np.sqrt((diff**2).sum(axis=2))
    base = (config.base_x, config.base_y)
    base_distances = np.hypot(pos[:, 0] - base[0], pos[:, 1] - base[1])
    devices = []
    for i in range(n):
        neigh = tuple(int(j) for j in np.flatnonzero(distances[i] <= config.radio_range) if j != i)
        devices.append(
            Device(
                id=i, x=float(pos[i, 0]), y=float(pos[i, 1]), role=roles[i],
                capability=caps.get(i), energy=config.initial_energy, neighbors=neigh,
                temp_trust=TemporaryTrust(config.temp_trust_rounds),
            )
        )
    fuzzy = FuzzyTrustModel(config.fuzzy_sets(), (config.weight_drop, config.weight_delay, config.weight_tamper))
    radio = RadioModel(config.e_elec, config.eps_fs, config.eps_mp)
    return NetworkState(
        config, devices, base, rng, radio, fuzzy, distances, base_distances,
        initial_energy=float(n * config.initial_energy),
    )


def elect_heads(state: NetworkState, events: RoundEvents | None = None) -> list[int]:
    """Each eligible alive device draws u ~ U[0,1) and becomes head when u < Th_CH."""
    cfg = state.config
    r = state.round
    period = int(math.floor(1.0 / cfg.head_probability))
    th = head_threshold(cfg.head_probability, r)
    heads = []
    for d in state.devices:
        if not d.alive or not d.eligible(r, period):
            continue
        if state.rng.random() < th:
            d.last_head = r
            heads.append(d.id)
            if events is not None:
                events.add("head", d.id)
    return heads


# trust verdicts ----------------------------------------------------------

def _raw_verdicts(state: NetworkState, observer: Device, targets: Sequence[int]) -> dict[int, Verdict]:
    """Verdicts without synergetic resolution, cached per (vector version, model version)."""
    cfg = state.config
    out: dict[int, Verdict] = {}
    if not observer.has_model:
        threshold = observer.threshold
        if threshold is None:
            threshold = cfg.generic_default_threshold
        for t in targets:
            value = observer.latest_trust(t)
            out[t] = generic_decide(NEUTRAL_TRUST if value is None else value, threshold)
        return out
    todo, vectors = [], []
    for t in targets:
        version = observer.versions.get(t, 0)
        cached = observer.verdict_cache.get(t)
        if cached is not None and cached[0] == version and cached[1] == observer.model_version:
            out[t] = cached[2]
            continue
        vec = observer.current_vector(t, cfg.vector_len)
        if vec is None:
            out[t] = Verdict.UNCERTAIN
            observer.verdict_cache[t] = (version, observer.model_version, Verdict.UNCERTAIN)
            continue
        todo.append(t)
        vectors.append(vec)
    if todo:
        results = decide_batch(observer.model, np.vstack(vectors), state.round)
        for t, vec, res in zip(todo, vectors, results):
            out[t] = res.verdict
            version = observer.versions.get(t, 0)
            observer.verdict_cache[t] = (version, observer.model_version, res.verdict)
            if observer.tested.get(t) != version:
                observer.tested[t] = version
                observer.pending.append(vec)
    return out


def _recommender_verdict(state: NetworkState, recommender: Device, target: int) -> Verdict:
    verdict = _raw_verdicts(state, recommender, [target])[target]
    if verdict is Verdict.UNCERTAIN and recommender.temp_trust.active(target, state.round):
        return Verdict.TRUSTED
    return verdict


def _effective_verdicts(state: NetworkState, observer: Device, targets: Sequence[int]) -> dict[int, Verdict]:
    cfg = state.config
    raw = _raw_verdicts(state, observer, targets)
    r = state.round
    out = {}
    neighbor_view = None
    for t in targets:
        v = raw[t]
        if v is Verdict.UNTRUSTED:
            observer.temp_trust.revoke(t)
        elif v is Verdict.UNCERTAIN:
            if observer.temp_trust.active(t, r):
                v = Verdict.TRUSTED
            else:
                if neighbor_view is None:
                    alive_neighbors = [j for j in observer.neighbors if state.devices[j].alive]
                    neighbor_view = _raw_verdicts(state, observer, alive_neighbors)
                count = 0
                for j, view in neighbor_view.items():
                    if j == t or view is not Verdict.TRUSTED:
                        continue
                    rec = state.devices[j]
                    if state.distances[j, t] > cfg.radio_range:
                        continue
                    if _recommender_verdict(state, rec, t) is Verdict.TRUSTED:
                        count += 1
                        if count >= cfg.min_recommenders:
                            break
                if count >= cfg.min_recommenders:
                    observer.temp_trust.grant(t, r)
                    v = Verdict.TRUSTED
                else:
                    v = Verdict.UNTRUSTED
        out[t] = v
    return out


# round phases ------------------------------------------------------------

def _mark_deaths(state: NetworkState, events: RoundEvents) -> None:
    for d in state.devices:
        if d.alive and d.energy <= 0.0:
            d.alive = False
            d.energy = 0.0
            events.deaths.append(d.id)
            events.add("death", d.id)


def _form_clusters(state: NetworkState, heads: list[int], events: RoundEvents) -> tuple[dict, list]:
    cfg = state.config
    r = state.round
    period = int(math.floor(1.0 / cfg.head_probability))
    bootstrap = r < cfg.bootstrap_rounds
    head_set = set(heads)
    clusters: dict[int, list[int]] = {h: [] for h in heads}
    direct: list[int] = []
    for d in state.devices:
        if not d.alive or d.id in head_set:
            continue
        in_range = [h for h in heads if state.distances[d.id, h] <= cfg.radio_range]
        if bootstrap:
            verdicts = {h: Verdict.TRUSTED for h in in_range}
        else:
            verdicts = _effective_verdicts(state, d, in_range)
        candidates = [
            Candidate(h, float(state.distances[d.id, h]), verdicts[h] is Verdict.TRUSTED)
            for h in in_range
        ]
        choice = join_cluster(candidates, d.eligible(r, period))
        if choice.kind == "member":
            clusters[choice.head].append(d.id)
        elif choice.kind == SELF_HEAD:
            clusters[d.id] = []
            events.add("self_head", d.id)
        else:
            direct.append(d.id)
            events.add("direct", d.id)
    return clusters, direct


def _observe(state: NetworkState, head: Device, outcomes: list[Behavior], overheard_by: list[Device]) -> None:
    cfg = state.config
    codes = [_KIND_CODES.index(o) for o in outcomes]
    for obs in overheard_by:
        window = obs.evidence.get(head.id)
        if window is None:
            window = obs.evidence[head.id] = deque(maxlen=cfg.window)
            obs.history[head.id] = deque(maxlen=cfg.vector_len)
        window.extend(codes)
        value = state.trust_from_counts(window.count(1), window.count(2), window.count(3), len(window))
        hist = obs.history[head.id]
        hist.append(value)
        obs.versions[head.id] = obs.versions.get(head.id, 0) + 1
        if obs.role is Role.SUPER and obs.model is None and len(hist) == cfg.vector_len:
            obs.collected.append((np.fromiter(hist, dtype=float, count=cfg.vector_len), head.id, state.round))


def _deliver(state: NetworkState, clusters: dict, direct: list, events: RoundEvents) -> None:
    cfg = state.config
    k = cfg.packet_bits
    radio = state.radio
    received: dict[int, list[int]] = {}
    # TDMA uplink, slots in member id order
    for h, members in sorted(clusters.items()):
        head = state.devices[h]
        got = []
        for m in sorted(members):
            dev = state.devices[m]
            events.sent += 1
            if not state.spend(dev, radio.energy_tx(k, float(state.distances[m, h]))):
                continue
            if head.energy <= 0.0 or not state.spend(head, radio.energy_rx(k)):
                continue
            got.append(m)
        received[h] = got
        events.members.update({m: h for m in members})
    for m in direct:
        dev = state.devices[m]
        events.sent += 1
        if state.spend(dev, radio.energy_tx(k, float(state.base_distances[m]))):
            events.delivered += 1
    _mark_deaths(state, events)
    # aggregated forwarding to the base station, overheard by neighbours
    for h in sorted(received):
        head = state.devices[h]
        if not head.alive:
            continue
        events.sent += 1
        if not state.spend(head, radio.energy_tx(k, float(state.base_distances[h]))):
            continue
        got = received[h]
        if not got:
            # only the head's own reading, nothing of the members' to misuse
            events.delivered += 1
            events.add("forward", h, 0, 1)
            continue
        # one aggregated frame: every member packet in it shares its fate
        outcome = apply_behavior(head, state.rng, cfg)
        events.forwarded += 1
        timely = len(got) + 1 if outcome is Behavior.TIMELY else 0
        if outcome is not Behavior.TIMELY:
            events.add(outcome.value, h, len(got), int(head.malicious))
            if head.malicious:
                events.attacks += 1
                events.add("attack", h, len(got), outcome.value)
        events.delivered += timely
        events.add("forward", h, len(got), timely)
        outcomes = [outcome] * len(got)
        observers = []
        for j in head.neighbors:
            obs = state.devices[j]
            if not obs.alive:
                continue
            if cfg.overhear_cost and not state.spend(obs, radio.energy_rx(k)):
                continue
            observers.append(obs)
        _observe(state, head, outcomes, observers)
    _mark_deaths(state, events)


def _send_threshold(state: NetworkState, sender: Device, events: RoundEvents) -> None:
    cfg = state.config
    if sender.training_set is None or not np.any(sender.training_set.levels == TrustLevel.HIGHER):
        return
    value = recommend_threshold(sender.training_set, cfg.threshold_trim)
    for j in sender.neighbors:
        rec = state.devices[j]
        if not rec.alive or rec.has_model:
            continue
        rec.recommendations[sender.id] = value
        rec.threshold = aggregate_thresholds(list(rec.recommendations.values()), cfg.threshold_gap)
        events.add("recommend", sender.id, j, round(value, 6))


def _train_seed(state: NetworkState, device: Device) -> int:
    return int(state.config.seed) * 1_000_003 + device.id * 10_007 + state.round


def _initial_training(state: NetworkState, device: Device, events: RoundEvents) -> None:
    cfg = state.config
    vectors = np.vstack([v for v, _, _ in device.collected])
    ids = [t for _, t, _ in device.collected]
    rounds = [r for _, _, r in device.collected]
    seed = _train_seed(state, device)
    try:
        labeled = prepare_dataset(vectors, ids, rounds, cfg.variance_target, cfg.max_components, seed)
        training_set = build_training_set(labeled)
    except ValueError as exc:
        events.add("train_skipped", device.id, "", str(exc).replace(",", ";"))
        return
    training_set = training_set.tail(cfg.dataset_cap)
    if len(training_set) < 2 * cfg.batch_size:
        events.add("train_skipped", device.id, "", "too few vectors")
        return
    model = ae.build_model(cfg.autoencoder_config(), seed)
    stats = ae.train(model, training_set, seed=seed)
    ae.calibrate_thresholds(model, training_set)
    state.train_stats.append((device.id, state.round, stats))
    device.model = model
    device.model_version += 1
    device.training_set = training_set
    device.buffer = ae.EligibilityBuffer(batch_size=cfg.batch_size, batches=cfg.retrain_batches)
    device.collected = []
    events.add("train", device.id, len(training_set), round(model.tau_rec, 6))
    # share parameters with neighbouring advanced devices that have no model yet
    for j in sorted(device.neighbors, key=lambda j: (state.distances[device.id, j], j)):
        adv = state.devices[j]
        if adv.alive and adv.role is Role.ADVANCED and adv.model is None:
            adv.model = model.copy()
            adv.model_version += 1
            adv.training_set = TrainingSet(np.empty((0, cfg.vector_len)), np.empty(0, dtype=int))
            adv.buffer = ae.EligibilityBuffer(batch_size=cfg.batch_size, batches=cfg.retrain_batches)
            adv.recommendations.clear()
            adv.threshold = None
            events.add("share", device.id, j)
    _send_threshold(state, device, events)


def _update_models(state: NetworkState, events: RoundEvents) -> None:
    cfg = state.config
    for d in state.devices:
        if not d.alive or d.role is Role.GENERIC:
            continue
        if d.role is Role.SUPER and d.model is None:
            if state.round >= cfg.bootstrap_rounds and len(d.collected) >= cfg.min_training_vectors:
                _initial_training(state, d, events)
            continue
        if not d.has_model:
            continue
        if d.pending:
            ae.collect_eligible(d.model, np.vstack(d.pending), d.buffer)
            d.pending = []
        if not d.buffer.retrain_due:
            continue
        try:
            model, training_set, stats = ae.retrain(
                d.model, d.training_set, d.buffer, cfg.retrain_epochs, _train_seed(state, d),
                cfg.retrain_batches_per_epoch or None,
            )
        except ValueError as exc:
            d.buffer.clear()
            events.add("retrain_skipped", d.id, "", str(exc).replace(",", ";"))
            continue
        d.model, d.training_set = model, training_set
        d.model_version += 1
        state.train_stats.append((d.id, state.round, stats))
        events.add("retrain", d.id, len(training_set), round(model.tau_rec, 6))
        _send_threshold(state, d, events)


def run_round(state: NetworkState) -> RoundEvents:
    """Advance the network by one round and return what happened in it."""
    events = RoundEvents(state.round)
    if not any(d.alive for d in state.devices):
        state.round += 1
        return events
    heads = elect_heads(state, events)
    clusters, direct = _form_clusters(state, heads, events)
    events.heads = sorted(clusters)
    events.direct = direct
    state.clusters = clusters
    _deliver(state, clusters, direct, events)
    _update_models(state, events)
    _mark_deaths(state, events)
    state.round += 1
    return events
