"""Twin Gaussian reward models: a learning model trained on true rewards and
a target copied from it at episode boundaries, used both to impute missing
rewards and to supply reward-entropy confidence."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import nn


def one_hot(index, size):
    v = np.zeros(size, dtype=np.float64)
    v[index] = 1.0
    return v


class RewardModelPair:
    """Maps (state [+ goal] ++ action encoding) -> Gaussian over the reward.

    Discrete actions are one-hot encoded; continuous action vectors are used
    as-is. The target model changes only on sync().
    """

    def __init__(self, state_dim, action_dim, discrete_actions, hidden=(32, 32), seed=0):
        rng = np.random.default_rng(seed)
        in_dim = state_dim + action_dim
        acts = ("relu",) * len(hidden) + ("identity",)
        self.learning = nn.GaussianNet(nn.init_network((in_dim, *hidden, 2), acts, rng))
        self.target = nn.GaussianNet(self.learning.params.copy())
        self.action_dim = action_dim
        self.discrete = discrete_actions

    def encode_action(self, action):
        if self.discrete:
            return one_hot(int(action), self.action_dim)
        return np.asarray(action, dtype=np.float64)

    def model_input(self, state, action, goal=None):
        parts = [np.asarray(state, dtype=np.float64)]
        if goal is not None:
            parts.append(np.asarray(goal, dtype=np.float64))
        parts.append(self.encode_action(action))
        return np.concatenate(parts)

    def predict(self, state, action, goal=None) -> nn.GaussianHead:
        """Target-model head; the imputed reward is its mean."""
        head, _ = self.target.head_cached(self.model_input(state, action, goal))
        return head

    def train(self, batch, lr) -> float:
        """One Adamax step of mean Gaussian NLL on the learning model."""
        if any(tr.reward is None for tr in batch):
            raise ValueError("reward model trains only on rewarded transitions")
        xs = np.stack([self.model_input(tr.state, tr.action, tr.goal) for tr in batch])
        targets = np.array([tr.reward for tr in batch], dtype=np.float64)[:, None]
        mean, std, ctx = self.learning.forward_batch(xs)
        var = std**2
        diff = mean - targets
        n = len(batch)
        loss = float(np.mean(0.5 * np.log(2.0 * np.pi * var) + diff**2 / (2.0 * var)))
        dmean = diff / var / n
        dstd = (1.0 / std - diff**2 / std**3) / n
        nn.adamax_step(self.learning.params, self.learning.backward(ctx, dmean, dstd), lr)
        return loss

    def sync(self):
        """Hard copy: target <- learning."""
        self.target.params.copy_weights_from(self.learning.params)

    def impute(self, batch, sample=False, rng=None):
        """Fill absent rewards with the target model's prediction; rewarded
        transitions pass through untouched."""
        out = []
        for tr in batch:
            if tr.reward is None:
                head = self.predict(tr.state, tr.action, tr.goal)
                r = float(head.mean[0])
                if sample:
                    r += float(head.std[0]) * rng.standard_normal()
                out.append(replace(tr, reward=r))
            else:
                out.append(tr)
        return out
