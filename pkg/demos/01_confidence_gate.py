"""Confidence gating from entropy: the core decision rule.

The agent asks the environment for a reward only when it is unsure.
Uncertainty is measured as entropy of the policy's action distribution
(and optionally of the reward model's prediction), mapped to a confidence
in [0, 1], and a regularizer forces a request every few steps no matter
how confident the agent gets.
"""

import numpy as np

from cgr.confidence import (ConfidenceGate, discrete_action_entropy, fuse,
                            gaussian_differential_entropy, regularizer,
                            to_confidence)
from cgr.nn import GaussianHead

# --- discrete action entropy: softmax over Q-values, normalized to [0, 1]

for q in ([0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [10.0, 0.0, 0.0, 0.0]):
    h = discrete_action_entropy(q)
    print(f"Q = {q!s:26s} entropy = {h:.4f}  confidence = {to_confidence(h):.4f}")

# --- differential entropy of a Gaussian prediction, clipped to [0, 10] bits

print()
for sigma in (0.01, 1.0, 10.0, 1e4):
    h = gaussian_differential_entropy(GaussianHead([0.0], [sigma]))
    print(f"sigma = {sigma:8g}  normalized entropy = {h:.4f}")

# --- fusion is a harmonic mean: the less confident signal dominates

print()
for a, b in ((0.9, 0.9), (0.9, 0.1), (0.5, 1.0)):
    print(f"fuse({a}, {b}) = {fuse(a, b):.4f}")

# --- regularizers decay with n, the steps since the last environment reward

print()
print("n      exp(nu=0.5)   hyper(nu=1)")
for n in range(5):
    print(f"{n}      {regularizer('exp', 0.5, n):.4f}        "
          f"{regularizer('hyper', 1.0, n):.4f}")

# --- the gate in action: a confident agent is still forced to ask by n = 3

print()
gate = ConfidenceGate("ae", "hyper", nu=1.0, cthresh=0.25)
rng = np.random.default_rng(0)
print("step  entropy  fused  mult   effective  request  n")
for step in range(12):
    h = float(rng.uniform(0.0, 0.3))  # a mostly-confident policy
    r = gate.evaluate(action_entropy=h)
    print(f"{step:4d}  {h:.3f}    {r.fused_confidence:.3f}  "
          f"{r.regularizer:.3f}  {r.fused_confidence * r.regularizer:.3f}      "
          f"{'yes' if r.request_reward else 'no ':3s}     {r.steps_since_reward}")
