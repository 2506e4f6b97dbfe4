import numpy as np
import pytest

from gitm import autoencoder as ae
from gitm.config import ScenarioConfig
from gitm.synthetic import mixed_training_set

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic_model():
    """A small model trained on a Higher/Medium mixture, shared by decision tests."""
    ts = mixed_training_set(256, rng=np.random.default_rng(3))
    model = ae.build_model(ae.AutoencoderConfig(epochs=60), seed=3)
    ae.train(model, ts, seed=3)
    ae.calibrate_thresholds(model, ts)
    return model, ts


@pytest.fixture
def tiny_config():
    """A network small and short enough to simulate in a few seconds."""
    return ScenarioConfig(
        device_count=30,
        field_size=100.0,
        base_x=50.0,
        base_y=150.0,
        rounds=120,
        bootstrap_rounds=10,
        min_training_vectors=64,
        batch_size=16,
        train_epochs=20,
        retrain_epochs=5,
        batches_per_epoch=2,
        retrain_batches_per_epoch=1,
        retrain_batches=2,
        malicious_pct=30,
        seed=7,
    )
