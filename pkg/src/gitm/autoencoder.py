"""Autoencoder built from a pair of least-squares GANs.

Four players: encoder ``En`` (trust vector -> latent code in [-1, 1]^m),
decoder/generator ``DeG`` (latent -> trust vector in [0, 1]^L), trust
discriminator ``D_T`` with a realness head and a Higher/Medium class head,
and latent discriminator ``D_L``. After training, the reconstruction error
of a vector decides whether it fits the distribution of trusted behavior.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import TrainingSet, TrustLevel
from .nn import (
    AdamState,
    BatchNorm,
    Dense,
    LeakyReLU,
    Network,
    Sigmoid,
    Tanh,
    backward,
    forward,
    least_squares_loss,
    mae_loss,
)

__all__ = [
    "AutoencoderConfig",
    "AutoencoderModel",
    "TrainStats",
    "TrainingDivergedError",
    "UntrainedModelError",
    "EligibilityBuffer",
    "build_model",
    "train",
    "reconstruct",
    "reconstruction_errors",
    "calibrate_thresholds",
    "class_scores",
    "classify_level",
    "collect_eligible",
    "retrain",
    "sample_latent_prior",
]


class TrainingDivergedError(FloatingPointError):
    pass


class UntrainedModelError(RuntimeError):
    pass


@dataclass
class AutoencoderConfig:
    vector_len: int = 10
    latent_dim: int = 4
    encoder_widths: tuple[int, ...] = (32, 16, 8)
    trust_disc_widths: tuple[int, ...] = (32, 16)
    latent_disc_widths: tuple[int, ...] = (16, 8)
    slope: float = 0.2
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    recon_weight: float = 10.0
    recon_updates_encoder: bool = True
    class_balance: bool = True
    epochs: int = 200
    retrain_epochs: int = 50
    batch_size: int = 32
    batches_per_epoch: int | None = None
    retrain_batches: int = 5
    dataset_cap: int = 2000
    rec_percentile: float = 95.0

    def __post_init__(self):
        self.encoder_widths = tuple(self.encoder_widths)
        self.trust_disc_widths = tuple(self.trust_disc_widths)
        self.latent_disc_widths = tuple(self.latent_disc_widths)
        if self.vector_len < 2 or self.latent_dim < 1:
            raise ValueError("vector length must be >= 2 and latent dimension >= 1")
        if self.latent_dim >= self.vector_len:
            raise ValueError("latent dimension must be smaller than the vector length")
        if any(w < 1 for w in self.encoder_widths + self.trust_disc_widths + self.latent_disc_widths):
            raise ValueError("layer widths must be positive")


def _coder(n_in: int, widths: Sequence[int], n_out: int, out_act, cfg: AutoencoderConfig, rng):
    layers = []
    prev = n_in
    for w in widths:
        layers += [Dense(prev, w), BatchNorm(w, cfg.bn_eps, cfg.bn_momentum), LeakyReLU(cfg.slope)]
        prev = w
    layers += [Dense(prev, n_out), out_act]
    return Network(layers, rng)


def _discriminator(n_in: int, widths: Sequence[int], n_out: int, cfg: AutoencoderConfig, rng):
    layers = []
    prev = n_in
    for w in widths:
        layers += [Dense(prev, w), LeakyReLU(cfg.slope)]
        prev = w
    layers.append(Dense(prev, n_out))
    return Network(layers, rng)


@dataclass
class TrainStats:
    d_t_loss: list[float] = field(default_factory=list)
    d_l_loss: list[float] = field(default_factory=list)
    generator_loss: list[float] = field(default_factory=list)
    encoder_loss: list[float] = field(default_factory=list)
    recon_loss: list[float] = field(default_factory=list)
    class_loss: list[float] = field(default_factory=list)
    real_score: list[float] = field(default_factory=list)
    fake_score: list[float] = field(default_factory=list)

    COLUMNS = (
        "d_t_loss", "d_l_loss", "generator_loss", "encoder_loss",
        "recon_loss", "class_loss", "real_score", "fake_score",
    )

    def __len__(self) -> int:
        return len(self.d_t_loss)

    def extend(self, other: "TrainStats") -> None:
        for name in self.COLUMNS:
            getattr(self, name).extend(getattr(other, name))

    def rows(self, start_epoch: int = 1) -> list[dict]:
        return [
            {"epoch": start_epoch + i, **{c: getattr(self, c)[i] for c in self.COLUMNS}}
            for i in range(len(self))
        ]


@dataclass
class AutoencoderModel:
    config: AutoencoderConfig
    encoder: Network
    decoder: Network
    trust_disc: Network
    latent_disc: Network
    optimizers: dict[str, AdamState]
    tau_rec: float | None = None
    tau_strict: float | None = None
    epochs_trained: int = 0

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    @property
    def vector_len(self) -> int:
        return self.config.vector_len

    @property
    def trained(self) -> bool:
        return self.epochs_trained > 0

    @property
    def calibrated(self) -> bool:
        return self.tau_rec is not None

    def networks(self) -> dict[str, Network]:
        return {
            "encoder": self.encoder,
            "decoder": self.decoder,
            "trust_disc": self.trust_disc,
            "latent_disc": self.latent_disc,
        }

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel(
            copy.deepcopy(self.config),
            self.encoder.copy(),
            self.decoder.copy(),
            self.trust_disc.copy(),
            self.latent_disc.copy(),
            {k: v.copy() for k, v in self.optimizers.items()},
            self.tau_rec,
            self.tau_strict,
            self.epochs_trained,
        )

    def to_dict(self) -> dict:
        """Shareable payload: configuration, network parameters and thresholds."""
        cfg = asdict(self.config)
        return {
            "format": "gitm-autoencoder/1",
            "config": cfg,
            "networks": {name: net.to_dict() for name, net in self.networks().items()},
            "tau_rec": self.tau_rec,
            "tau_strict": self.tau_strict,
            "epochs_trained": self.epochs_trained,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AutoencoderModel":
        if data.get("format") != "gitm-autoencoder/1":
            raise ValueError("unrecognized model payload")
        cfg = AutoencoderConfig(**data["config"])
        nets = {name: Network.from_dict(d) for name, d in data["networks"].items()}
        return cls(
            cfg,
            nets["encoder"],
            nets["decoder"],
            nets["trust_disc"],
            nets["latent_disc"],
            _fresh_optimizers(cfg),
            data["tau_rec"],
            data["tau_strict"],
            data["epochs_trained"],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "AutoencoderModel":
        return cls.from_dict(json.loads(text))


def _fresh_optimizers(cfg: AutoencoderConfig) -> dict[str, AdamState]:
    return {
        name: AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        for name in ("encoder", "decoder", "trust_disc", "latent_disc")
    }


def build_model(config: AutoencoderConfig | None = None, seed: int = 0) -> AutoencoderModel:
    cfg = config or AutoencoderConfig()
    rng = np.random.default_rng(seed)
    L, m = cfg.vector_len, cfg.latent_dim
    encoder = _coder(L, cfg.encoder_widths, m, Tanh(), cfg, rng)
    decoder = _coder(m, cfg.encoder_widths[::-1], L, Sigmoid(), cfg, rng)
    trust_disc = _discriminator(L, cfg.trust_disc_widths, 2, cfg, rng)
    latent_disc = _discriminator(m, cfg.latent_disc_widths, 1, cfg, rng)
    return AutoencoderModel(cfg, encoder, decoder, trust_disc, latent_disc, _fresh_optimizers(cfg))


def sample_latent_prior(rng: np.random.Generator, n: int, latent_dim: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, latent_dim))


def _check(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise TrainingDivergedError(f"{name} became non-finite")
    return value


def _train_batch(
    model: AutoencoderModel, x: np.ndarray, y_class: np.ndarray, rng, w_class: np.ndarray | None = None
) -> dict:
    cfg = model.config
    En, DeG, DT, DL = model.encoder, model.decoder, model.trust_disc, model.latent_disc
    opt = model.optimizers
    n = x.shape[0]
    ones = np.ones((n, 1))
    zeros = np.zeros((n, 1))

    # (1) latent discriminator: prior samples are real, encoder codes are fake.
    # Discriminators have no batch normalization, so both halves share one pass.
    z_enc, c_en = forward(En, x)
    z_prior = sample_latent_prior(rng, n, cfg.latent_dim)
    s_dl, c_dl = forward(DL, np.vstack([z_prior, z_enc]))
    l_prior, g_prior = least_squares_loss(s_dl[:n], ones)
    l_enc, g_enc = least_squares_loss(s_dl[n:], zeros)
    backward(DL, c_dl, np.vstack([g_prior, g_enc]))
    DL.apply_adam(opt["latent_disc"])

    # (2) trust discriminator: realness head and Higher/Medium class head
    z = sample_latent_prior(rng, n, cfg.latent_dim)
    x_fake, c_gen = forward(DeG, z)
    out_dt, c_dt = forward(DT, np.vstack([x, x_fake]))
    out_real, out_fake = out_dt[:n], out_dt[n:]
    l_real, g_real = least_squares_loss(out_real[:, :1], ones)
    l_fake, g_fake = least_squares_loss(out_fake[:, :1], zeros)
    l_cls, g_cls = least_squares_loss(out_real[:, 1:], y_class[:, None])
    if w_class is not None:
        g_cls = g_cls * w_class[:, None]
        l_cls = float(np.mean(w_class * (out_real[:, 1] - y_class) ** 2))
    g_dt = np.vstack([np.hstack([g_real, g_cls]), np.hstack([g_fake, np.zeros_like(g_fake)])])
    backward(DT, c_dt, g_dt)
    DT.apply_adam(opt["trust_disc"])

    # (3) encoder: fool D_L, plus reconstruction error through the decoder.
    # The encoder is unchanged since (1), so its forward pass is reused.
    s_enc, c_dl = forward(DL, z_enc)
    l_en, g_s = least_squares_loss(s_enc, ones)
    _, g_z = backward(DL, c_dl, g_s)
    if cfg.recon_updates_encoder:
        x_rec, c_de = forward(DeG, z_enc)
        _, g_rec = mae_loss(x, x_rec)
        _, g_z_rec = backward(DeG, c_de, cfg.recon_weight * g_rec)
        g_z = g_z + g_z_rec
    backward(En, c_en, g_z)
    En.apply_adam(opt["encoder"])

    # (4) decoder/generator: fool D_T's realness head on the samples from (2),
    # plus reconstruction error through the updated encoder
    out_fake, c_dt = forward(DT, x_fake)
    l_gen, g_r = least_squares_loss(out_fake[:, :1], ones)
    _, g_x = backward(DT, c_dt, np.hstack([g_r, np.zeros_like(g_r)]))
    backward(DeG, c_gen, g_x)
    z_enc, _ = forward(En, x)
    x_rec, c_rec = forward(DeG, z_enc)
    l_rec, g_rec = mae_loss(x, x_rec)
    backward(DeG, c_rec, cfg.recon_weight * g_rec, accumulate=True)
    DeG.apply_adam(opt["decoder"])

    return {
        "d_t_loss": l_real + l_fake,
        "d_l_loss": l_prior + l_enc,
        "generator_loss": l_gen,
        "encoder_loss": l_en,
        "recon_loss": l_rec,
        "class_loss": l_cls,
        "real_score": float(out_real[:, 0].mean()),
        "fake_score": float(out_fake[:, 0].mean()),
    }


def train(
    model: AutoencoderModel,
    training_set: TrainingSet,
    epochs: int | None = None,
    batch_size: int | None = None,
    seed: int = 0,
    batches_per_epoch: int | None = None,
) -> TrainStats:
    """Run the four-player schedule over shuffled mini-batches.

    An epoch is one pass over the training set, or ``batches_per_epoch``
    mini-batches drawn from a continuing shuffled stream when that is set.
    """
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    batch_size = cfg.batch_size if batch_size is None else batch_size
    if batches_per_epoch is None:
        batches_per_epoch = cfg.batches_per_epoch
    stats = TrainStats()
    if epochs == 0:
        return stats
    X = training_set.vectors
    if X.shape[1] != cfg.vector_len:
        raise ValueError(f"training vectors have length {X.shape[1]}, model expects {cfg.vector_len}")
    n = X.shape[0]
    if n < 2 * batch_size:
        raise ValueError(f"training set of {n} vectors is smaller than two batches of {batch_size}")
    if not np.any(training_set.levels == TrustLevel.HIGHER):
        raise ValueError("training set has no Higher-level vectors")
    y = (training_set.levels == TrustLevel.HIGHER).astype(float)
    w = None
    n_higher = int(y.sum())
    if cfg.class_balance and 0 < n_higher < y.size:
        # inverse class frequency, mean weight 1
        w = np.where(y == 1.0, y.size / (2.0 * n_higher), y.size / (2.0 * (y.size - n_higher)))
    rng = np.random.default_rng(seed)
    per_epoch = batches_per_epoch or n // batch_size
    order = rng.permutation(n)
    cursor = 0
    for _ in range(epochs):
        if not batches_per_epoch:
            order = rng.permutation(n)
            cursor = 0
        sums: dict[str, float] = {}
        for _ in range(per_epoch):
            if cursor + batch_size > n:
                order = rng.permutation(n)
                cursor = 0
            idx = order[cursor : cursor + batch_size]
            cursor += batch_size
            values = _train_batch(model, X[idx], y[idx], rng, None if w is None else w[idx])
            for k, v in values.items():
                sums[k] = sums.get(k, 0.0) + v
        for k in TrainStats.COLUMNS:
            getattr(stats, k).append(_check(k, sums[k] / per_epoch))
        model.epochs_trained += 1
    return stats


def _as_batch(vectors, model: AutoencoderModel) -> np.ndarray:
    X = np.asarray(getattr(vectors, "values", vectors), dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.vector_len:
        raise ValueError(f"expected trust vectors of length {model.vector_len}, got shape {X.shape}")
    return X


def _require_trained(model: AutoencoderModel) -> None:
    if not model.trained:
        raise UntrainedModelError("model has not been trained")


def reconstruct(model: AutoencoderModel, v) -> tuple[np.ndarray, float]:
    """Inference-mode reconstruction of one vector and its mean absolute error."""
    _require_trained(model)
    x = _as_batch(v, model)
    if x.shape[0] != 1:
        raise ValueError("reconstruct takes a single trust vector")
    out = model.decoder.predict(model.encoder.predict(x))
    return out[0], mae_loss(x[0], out[0])[0]


def reconstruction_errors(model: AutoencoderModel, vectors) -> np.ndarray:
    _require_trained(model)
    X = _as_batch(vectors, model)
    out = model.decoder.predict(model.encoder.predict(X))
    return np.abs(out - X).mean(axis=1)


def calibrate_thresholds(model: AutoencoderModel, training_set: TrainingSet) -> tuple[float, float]:
    """Set ``tau_rec`` (nearest-rank 95th percentile) and ``tau_strict`` (median)."""
    _require_trained(model)
    if len(training_set) == 0:
        raise ValueError("empty training set")
    errors = np.sort(reconstruction_errors(model, training_set.vectors))
    rank = math.ceil(model.config.rec_percentile / 100.0 * errors.size)
    tau_rec = float(errors[max(rank, 1) - 1])
    tau_strict = float(np.median(errors))
    model.tau_rec, model.tau_strict = tau_rec, min(tau_strict, tau_rec)
    return model.tau_rec, model.tau_strict


def class_scores(model: AutoencoderModel, vectors) -> np.ndarray:
    _require_trained(model)
    return model.trust_disc.predict(_as_batch(vectors, model))[:, 1]


def level_from_score(score: float) -> TrustLevel:
    return TrustLevel.HIGHER if score >= 0.5 else TrustLevel.MEDIUM


def classify_level(model: AutoencoderModel, v) -> TrustLevel:
    _, error = reconstruct(model, v)
    if model.tau_rec is None:
        raise UntrainedModelError("model thresholds are not calibrated")
    if error > model.tau_rec:
        raise ValueError("vector fails reconstruction; classify only in-distribution vectors")
    return level_from_score(float(class_scores(model, v)[0]))


@dataclass
class EligibilityBuffer:
    """Vectors that strictly fit the training distribution, awaiting the next update."""

    vectors: list[np.ndarray] = field(default_factory=list)
    levels: list[TrustLevel] = field(default_factory=list)
    batch_size: int = 32
    batches: int = 5

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def retrain_due(self) -> bool:
        return len(self.vectors) >= self.batch_size * self.batches

    def clear(self) -> None:
        self.vectors.clear()
        self.levels.clear()


def collect_eligible(
    model: AutoencoderModel, tested, buffer: EligibilityBuffer | None = None
) -> tuple[np.ndarray, bool]:
    """Keep tested vectors with reconstruction error <= ``tau_strict``.

    Eligible vectors are labelled by the class head at collection time and
    appended to ``buffer`` when given. Returns the eligible rows and whether
    an update is due.
    """
    if not model.calibrated:
        raise UntrainedModelError("model thresholds are not calibrated")
    X = _as_batch(tested, model) if len(tested) else np.empty((0, model.vector_len))
    if X.shape[0] == 0:
        return X, bool(buffer is not None and buffer.retrain_due)
    errors = reconstruction_errors(model, X)
    keep = errors <= model.tau_strict
    eligible = X[keep]
    if buffer is None:
        cfg = model.config
        return eligible, eligible.shape[0] >= cfg.batch_size * cfg.retrain_batches
    if eligible.shape[0]:
        scores = class_scores(model, eligible)
        for row, s in zip(eligible, scores):
            buffer.vectors.append(row.copy())
            buffer.levels.append(level_from_score(float(s)))
    return eligible, buffer.retrain_due


def retrain(
    model: AutoencoderModel,
    training_set: TrainingSet,
    buffer: EligibilityBuffer,
    epochs: int | None = None,
    seed: int = 0,
    batches_per_epoch: int | None = None,
) -> tuple[AutoencoderModel, TrainingSet, TrainStats]:
    """Append eligible vectors, evict the oldest beyond the cap, and continue training.

    The passed model is left untouched; the updated copy carries recalibrated
    thresholds.
    """
    if len(buffer) == 0:
        raise ValueError("retrain needs eligible vectors")
    cfg = model.config
    updated_set = training_set.extend(
        np.vstack(buffer.vectors), np.asarray([int(l) for l in buffer.levels])
    ).tail(cfg.dataset_cap)
    updated = model.copy()
    epochs = cfg.retrain_epochs if epochs is None else epochs
    batch = min(cfg.batch_size, len(updated_set) // 2)
    stats = train(updated, updated_set, epochs, batch, seed, batches_per_epoch)
    calibrate_thresholds(updated, updated_set)
    buffer.clear()
    return updated, updated_set, stats
