"""Fuzzy trust values, labelled vectors, a trained autoencoder and a few verdicts."""

import numpy as np

from gitm import TrustAttributes, build_model, decide, evaluate_trust, prepare_dataset, train
from gitm.autoencoder import AutoencoderConfig, calibrate_thresholds
from gitm.dataset import TrustLevel, build_training_set
from gitm.synthetic import level_vectors


def main():
    for rates in [(0.0, 0.0, 0.0), (0.3, 0.1, 0.0), (0.1, 0.1, 0.6), (0.9, 0.9, 0.9)]:
        print(f"rates {rates} -> trust {evaluate_trust(TrustAttributes(*rates)).value:.3f}")

    rng = np.random.default_rng(0)
    vectors = np.vstack([level_vectors(level, 120, rng=rng) for level in TrustLevel])
    dataset = prepare_dataset(vectors, seed=0)
    print("level counts:", {lvl.name: n for lvl, n in dataset.counts().items()})

    training_set = build_training_set(dataset)
    model = build_model(AutoencoderConfig(epochs=40), seed=0)
    stats = train(model, training_set, seed=0)
    calibrate_thresholds(model, training_set)
    print(f"trained {model.epochs_trained} epochs, final recon loss {stats.recon_loss[-1]:.4f}, tau_rec {model.tau_rec:.4f}")

    for level in TrustLevel:
        v = level_vectors(level, 1, rng=rng)[0]
        print(f"{level.name:>6} vector -> {decide(model, v).verdict.name}")


if __name__ == "__main__":
    main()
