"""Confidence-gated reward requests for reinforcement learning.

A desk-scale training engine that asks the environment for a reward only
when an entropy-derived confidence measure is low, imputing the rest from a
learned Gaussian reward model.
"""

from .buffers import FeedbackBuffer, RingBuffer, Transition, her_relabel
from .config import ConfigError, ExperimentConfig, parse_config
from .confidence import (
    ConfidenceGate,
    ConfidenceReport,
    discrete_action_entropy,
    fuse,
    gaussian_differential_entropy,
    regularizer,
    to_confidence,
)
from .nn import GaussianHead, NetworkParams, softmax
from .reward_model import RewardModelPair
from .trainer import ConvergenceDetector, RunResult, Trainer, train

__all__ = [
    "ConfidenceGate",
    "ConfidenceReport",
    "ConfigError",
    "ConvergenceDetector",
    "ExperimentConfig",
    "FeedbackBuffer",
    "GaussianHead",
    "NetworkParams",
    "RewardModelPair",
    "RingBuffer",
    "RunResult",
    "Trainer",
    "Transition",
    "discrete_action_entropy",
    "fuse",
    "gaussian_differential_entropy",
    "her_relabel",
    "parse_config",
    "regularizer",
    "softmax",
    "to_confidence",
    "train",
]
