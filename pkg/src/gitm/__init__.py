"""Trust management for clustered device networks.

Fuzzy trust evaluation, PCA/k-means dataset labelling, an adversarial
autoencoder trust classifier, device-level trust decisions and a
round-based clustered network simulator.
"""

from .autoencoder import AutoencoderConfig, AutoencoderModel, build_model, train
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .dataset import TrainingSet, TrustLevel, prepare_dataset
from .decision import Verdict, aggregate_thresholds, decide, generic_decide, recommend_threshold
from .fuzzy import FuzzyTrustModel, TrustAttributes, evaluate_trust
from .harness import SummaryMetrics, compute_metrics, run_scenario, sweep_malicious

__version__ = "0.1.0"

__all__ = [
    "AutoencoderConfig",
    "AutoencoderModel",
    "ConfigError",
    "FuzzyTrustModel",
    "ScenarioConfig",
    "SummaryMetrics",
    "TrainingSet",
    "TrustAttributes",
    "TrustLevel",
    "Verdict",
    "aggregate_thresholds",
    "build_model",
    "compute_metrics",
    "decide",
    "evaluate_trust",
    "generic_decide",
    "load_config",
    "parse_config",
    "prepare_dataset",
    "recommend_threshold",
    "run_scenario",
    "sweep_malicious",
    "train",
]
