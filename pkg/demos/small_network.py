"""A short simulation on a small network, then a two-point sweep."""

import sys
from pathlib import Path

from gitm import ScenarioConfig, run_scenario, sweep_malicious


def main(out_dir="demo_out"):
    cfg = ScenarioConfig(
        device_count=40, field_size=120.0, base_x=60.0, base_y=160.0, rounds=200,
        bootstrap_rounds=20, min_training_vectors=64, train_epochs=20, retrain_epochs=5, seed=5,
    )
    result = run_scenario(cfg, Path(out_dir) / "single")
    for key, value in result.summary.to_dict().items():
        print(f"{key:>18}: {value}")

    _, aggregates = sweep_malicious(cfg, percentages=(10, 40), seeds=(1, 2), out_dir=Path(out_dir))
    for row in aggregates:
        print(row)


if __name__ == "__main__":
    main(*sys.argv[1:])
