"""Scenario execution, summary metrics and malicious-percentage sweeps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .autoencoder import TrainStats
from .config import ScenarioConfig
from .network import NetworkState, RoundEvents, create_network, run_round

__all__ = [
    "SummaryMetrics",
    "ScenarioResult",
    "EVENT_COLUMNS",
    "METRIC_COLUMNS",
    "SWEEP_COLUMNS",
    "compute_metrics",
    "run_scenario",
    "sweep_malicious",
    "write_table",
]

EVENT_COLUMNS = ("round", "kind", "actor", "target", "value")
METRIC_COLUMNS = ("round", "alive", "delivered", "attacks", "energy_remaining")
SWEEP_COLUMNS = (
    "malicious_pct", "seed", "security_rate", "total_attacks", "fnd", "hnd",
    "throughput", "rounds_run",
)


@dataclass
class SummaryMetrics:
    security_rate: float
    total_attacks: int
    fnd: int
    hnd: int
    throughput: int
    rounds_run: int
    last_attack_round: int
    packets_sent: int = 0
    forward_events: int = 0
    training_runs: int = 0

    def __post_init__(self):
        if not 0.0 <= self.security_rate <= 1.0:
            raise ValueError("security rate outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    summary: SummaryMetrics
    metrics: list[tuple]
    events: list[tuple]
    train_stats: list[tuple[int, int, TrainStats]] = field(default_factory=list)
    state: NetworkState | None = None


def compute_metrics(
    events: Iterable[tuple],
    round_budget: int,
    metrics: Sequence[tuple] = (),
    device_count: int | None = None,
) -> SummaryMetrics:
    """Summarise an event log.

    Logged rounds are 0-based; reported rounds count from 1, so an event in
    logged round r happened in round r + 1. The security rate is
    ``(R_total - r_last_attack) / R_total`` with ``r_last_attack`` the latest
    round holding an attack event (0 without attacks). Lifetimes count rounds
    until the first and half of the devices died; a censored lifetime reports
    the round budget.
    """
    if round_budget < 1:
        raise ValueError("round budget must be >= 1")
    last_attack, attacks, deaths, trainings = 0, 0, [], 0
    for row in events:
        r, kind = int(row[0]), row[1]
        if kind == "attack":
            attacks += 1
            last_attack = max(last_attack, r + 1)
        elif kind == "death":
            deaths.append(r)
        elif kind in ("train", "retrain"):
            trainings += 1
    deaths.sort()
    fnd = deaths[0] + 1 if deaths else round_budget
    if device_count is None:
        device_count = int(metrics[0][1]) if metrics else 0
    half = math.ceil(device_count / 2) if device_count else 0
    hnd = deaths[half - 1] + 1 if half and len(deaths) >= half else round_budget
    rate = (round_budget - last_attack) / round_budget if attacks else 1.0
    throughput = int(sum(int(m[2]) for m in metrics))
    return SummaryMetrics(
        security_rate=max(0.0, min(1.0, rate)),
        total_attacks=attacks,
        fnd=min(fnd, round_budget),
        hnd=min(hnd, round_budget),
        throughput=throughput,
        rounds_run=len(metrics),
        last_attack_round=last_attack,
        training_runs=trainings,
    )


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(_fmt(v) for v in row)


def _fmt(value):
    if isinstance(value, float):
        return repr(round(value, 9))
    return value


def run_scenario(config: ScenarioConfig, out_dir=None, keep_state: bool = False) -> ScenarioResult:
    """Simulate until the round budget is spent or every device is dead."""
    state = create_network(config)
    events: list[tuple] = []
    metrics: list[tuple] = []
    sent = forwarded = 0
    while state.round < config.rounds:
        ev: RoundEvents = run_round(state)
        events.extend(ev.log)
        sent += ev.sent
        forwarded += ev.forwarded
        alive = sum(1 for d in state.devices if d.alive)
        metrics.append((ev.round, alive, ev.delivered, ev.attacks, state.residual_energy()))
        if alive == 0:
            break
    summary = compute_metrics(events, config.rounds, metrics, config.device_count)
    summary.packets_sent = sent
    summary.forward_events = forwarded
    result = ScenarioResult(config, summary, metrics, events, state.train_stats, state if keep_state else None)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def write_outputs(result: ScenarioResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "metrics.csv", METRIC_COLUMNS, result.metrics)
    write_table(out / "events.csv", EVENT_COLUMNS, result.events)
    (out / "summary.json").write_text(json.dumps(result.summary.to_dict(), indent=2, sort_keys=True) + "\n")
    if result.train_stats:
        device, _, stats = result.train_stats[0]
        rows = [[row[c] for c in ("epoch",) + TrainStats.COLUMNS] for row in stats.rows()]
        write_table(out / "training.csv", ("epoch",) + TrainStats.COLUMNS, rows)


def sweep_malicious(
    config: ScenarioConfig,
    percentages: Sequence[float] = (10, 20, 30, 40, 50),
    seeds: Sequence[int] = (1, 2, 3),
    out_dir=None,
    runner=None,
) -> tuple[list[tuple], list[tuple]]:
    """One run per (percentage, seed) plus a mean and a std row per percentage.

    ``runner`` maps a config to SummaryMetrics; it defaults to a full
    simulation and exists so callers can reuse runs they already have.
    """
    runner = runner or (lambda cfg: run_scenario(cfg).summary)
    rows, aggregates = [], []
    keys = ("security_rate", "total_attacks", "fnd", "hnd", "throughput", "rounds_run")
    for pct in percentages:
        summaries = []
        for seed in seeds:
            s = runner(config.replace(malicious_pct=float(pct), seed=int(seed)))
            summaries.append(s)
            rows.append((float(pct), int(seed)) + tuple(getattr(s, k) for k in keys))
        table = np.array([[float(getattr(s, k)) for k in keys] for s in summaries])
        aggregates.append((float(pct), "mean") + tuple(float(v) for v in table.mean(axis=0)))
        aggregates.append((float(pct), "std") + tuple(float(v) for v in table.std(axis=0)))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "sweep.csv", SWEEP_COLUMNS, rows + aggregates)
    return rows, aggregates
