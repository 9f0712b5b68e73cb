"""Learning a Gaussian reward model and imputing missing rewards.

The reward model is a small dense net that outputs a mean and standard
deviation for r(s, a), trained by negative log-likelihood on the feedback
buffer (transitions with true environment rewards). A target copy of the
model fills in rewards the agent chose not to request.
"""

import numpy as np

from cgr.buffers import Transition
from cgr.reward_model import RewardModelPair

rng = np.random.default_rng(0)

# synthetic task: reward depends on state and action, with observation noise
#   r(s, a) = 2*s[0] - s[1] + (1 if a == 1 else 0) + N(0, 0.1)


def sample_transition():
    s = rng.uniform(-1, 1, size=2)
    a = int(rng.integers(2))
    r = 2 * s[0] - s[1] + float(a) + rng.normal(0, 0.1)
    return Transition(s, a, r, False, s)


pair = RewardModelPair(state_dim=2, action_dim=2, discrete_actions=True, seed=0)

# --- NLL training on minibatches from a feedback buffer

print("batch    mean NLL")
for i in range(2001):
    batch = [sample_transition() for _ in range(16)]
    loss = pair.train(batch, lr=0.005)
    if i % 400 == 0:
        print(f"{i:5d}    {loss:8.4f}")
pair.sync()  # hard-copy into the target model used for imputation

# --- the learned mean tracks the true reward function

print("\nstate          action  true r   predicted mean  predicted std")
for _ in range(5):
    s = rng.uniform(-1, 1, size=2)
    a = int(rng.integers(2))
    head = pair.predict(s, a)
    true = 2 * s[0] - s[1] + float(a)
    print(f"[{s[0]:+.2f} {s[1]:+.2f}]  {a}       {true:+.3f}   "
          f"{head.mean[0]:+.3f}          {head.std[0]:.3f}")

# --- imputation: absent rewards are replaced by the target model's mean

missing = Transition(np.array([0.5, -0.5]), 1, None, False, np.zeros(2))
present = sample_transition()
out = pair.impute([present, missing])
print(f"\npresent reward kept:   {out[0].reward:+.3f}")
print(f"absent reward imputed: {out[1].reward:+.3f} "
      f"(true value {2 * 0.5 + 0.5 + 1:+.3f})")
