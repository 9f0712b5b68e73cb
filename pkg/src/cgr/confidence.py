"""Entropy-derived confidence and the reward-request gate.

Action entropy comes from the softmax of Q-values (discrete) or the policy
Gaussian (continuous); reward entropy from the reward model's predicted
Gaussian. Confidence is 1 - normalized entropy; the two confidences fuse by
harmonic mean, get multiplied by a decaying regularizer, and the environment
reward is requested whenever the result drops to the threshold or below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import GaussianHead, softmax

DIFF_ENTROPY_CLIP = 10.0
DEFAULT_CTHRESH = 0.25

ENTROPY_MODES = ("off", "ae", "ae_re", "random", "constant")
REGULARIZER_MODES = ("none", "exp", "hyper")
DEFAULT_NU = {"none": 0.0, "exp": 0.5, "hyper": 1.0}


@dataclass
class ConfidenceReport:
    action_entropy: Optional[float]  # bits, normalized to [0,1]
    reward_entropy: Optional[float]  # bits, clipped+normalized; None in AE mode
    action_confidence: Optional[float]
    reward_confidence: Optional[float]
    regularizer: float
    fused_confidence: float
    request_reward: bool
    steps_since_reward: int  # n before this step's update


def discrete_action_entropy(q_values) -> float:
    """Base-2 entropy of softmax(Q), normalized by log2 |A| into [0,1]."""
    q = np.asarray(q_values, dtype=np.float64)
    if q.size < 2:
        raise ValueError("need at least 2 actions")
    p = softmax(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log2(p), 0.0)
    return float(-terms.sum() / np.log2(q.size))


def gaussian_differential_entropy(head: GaussianHead) -> float:
    """Differential entropy in bits, summed over dimensions, clipped to
    [0, 10] and normalized by 10."""
    h = float(np.sum(0.5 * np.log2(2.0 * np.pi * np.e * head.std**2)))
    return min(max(h, 0.0), DIFF_ENTROPY_CLIP) / DIFF_ENTROPY_CLIP


def to_confidence(normalized_entropy) -> float:
    if not 0.0 <= normalized_entropy <= 1.0:
        raise ValueError("normalized entropy must lie in [0,1]")
    return 1.0 - normalized_entropy


def fuse(action_conf, reward_conf=None) -> float:
    """Harmonic mean of the two confidences; passes action confidence through
    when there is no reward confidence (AE-only mode)."""
    if reward_conf is None:
        return action_conf
    s = action_conf + reward_conf
    return 2.0 * action_conf * reward_conf / s if s > 0.0 else 0.0


def regularizer(mode, nu, n) -> float:
    if n < 0:
        raise ValueError("step counter must be non-negative")
    if mode == "none":
        return 1.0
    if mode == "exp":
        return float(np.exp(-nu * n))
    if mode == "hyper":
        return 1.0 / (1.0 + nu * n)
    raise ValueError(f"unknown regularizer mode {mode!r}")


class ConfidenceGate:
    """Per-run gate state: holds n, the steps since the last environment
    reward, and produces a ConfidenceReport per step."""

    def __init__(
        self,
        entropy_mode="ae_re",
        reg_mode="none",
        nu=None,
        cthresh=DEFAULT_CTHRESH,
        constant_conf_zero=False,
    ):
        if entropy_mode not in ENTROPY_MODES:
            raise ValueError(f"unknown entropy mode {entropy_mode!r}")
        if reg_mode not in REGULARIZER_MODES:
            raise ValueError(f"unknown regularizer mode {reg_mode!r}")
        self.entropy_mode = entropy_mode
        self.reg_mode = reg_mode
        self.nu = DEFAULT_NU[reg_mode] if nu is None else nu
        self.cthresh = cthresh
        # alternate reading of the constant baseline: entropy 1 -> confidence 0
        self.constant_conf_zero = constant_conf_zero
        self.n = 0

    def evaluate(self, action_entropy=None, reward_entropy=None, rng=None) -> ConfidenceReport:
        """Gate one step. Entropies are normalized values in [0,1]; which are
        required depends on the mode. Updates n in place."""
        mode = self.entropy_mode
        action_conf = reward_conf = None
        if mode == "off":
            fused = 0.0  # always request
        elif mode == "ae":
            action_conf = to_confidence(action_entropy)
            fused = fuse(action_conf)
        elif mode == "ae_re":
            action_conf = to_confidence(action_entropy)
            reward_conf = to_confidence(reward_entropy)
            fused = fuse(action_conf, reward_conf)
        elif mode == "random":
            fused = 1.0 - rng.uniform()
        else:  # constant
            fused = 0.0 if self.constant_conf_zero else 1.0
        mult = regularizer(self.reg_mode, self.nu, self.n)
        request = fused * mult <= self.cthresh
        n_before = self.n
        self.n = 0 if request else self.n + 1
        return ConfidenceReport(
            action_entropy=action_entropy,
            reward_entropy=reward_entropy,
            action_confidence=action_conf,
            reward_confidence=reward_conf,
            regularizer=mult,
            fused_confidence=fused,
            request_reward=request,
            steps_since_reward=n_before,
        )
