"""Learner architectures: DQN for discrete actions and a Gaussian-policy
actor-critic for continuous actions, each with a slowly-updated target."""

from __future__ import annotations

import numpy as np

from . import nn

EPS_DECAY = 0.995
EPS_MIN = 0.01


def _soft_sync(target: nn.NetworkParams, learned: nn.NetworkParams, tau):
    """target <- tau * target + (1 - tau) * learned."""
    for t, l in zip(target.layers, learned.layers):
        if t.W.shape != l.W.shape:
            raise ValueError("target/learned shape mismatch")
        t.W *= tau
        t.W += (1.0 - tau) * l.W
        t.b *= tau
        t.b += (1.0 - tau) * l.b


def _stack_batch(batch, input_fn):
    states = np.stack([input_fn(tr.state, tr.goal) for tr in batch])
    next_states = np.stack([input_fn(tr.next_state, tr.goal) for tr in batch])
    rewards = np.array([tr.reward for tr in batch], dtype=np.float64)
    if np.any([tr.reward is None for tr in batch]):
        raise ValueError("training batch contains an absent reward")
    terminals = np.array([tr.terminal for tr in batch], dtype=np.float64)
    return states, next_states, rewards, terminals


def concat_goal(state, goal):
    """Network input for a transition: state, or state ++ goal when present."""
    if goal is None:
        return state
    return np.concatenate([state, goal])


class DqnAgent:
    def __init__(self, state_dim, n_actions, hidden=(64, 64), epsilon=1.0, seed=0):
        rng = np.random.default_rng(seed)
        sizes = (state_dim, *hidden, n_actions)
        acts = ("relu",) * len(hidden) + ("identity",)
        self.params = nn.init_network(sizes, acts, rng)
        self.target = self.params.copy()
        self.n_actions = n_actions
        self.epsilon = epsilon

    def q_values(self, state):
        return nn.forward(self.params, state)

    def select_action(self, state, rng) -> int:
        if rng.random() < self.epsilon:
            return int(rng.integers(self.n_actions))
        q = self.q_values(state)
        return int(np.argmax(q))  # argmax takes the lowest index on ties

    def train_step(self, batch, discount, lr, input_fn=concat_goal) -> float:
        states, next_states, rewards, terminals = _stack_batch(batch, input_fn)
        actions = np.array([tr.action for tr in batch], dtype=np.intp)
        q_next = nn.forward(self.target, next_states)
        targets = rewards + discount * q_next.max(axis=1) * (1.0 - terminals)
        q, cache = nn.forward_cached(self.params, states)
        picked = q[np.arange(len(batch)), actions]
        loss = float(np.mean((picked - targets) ** 2))
        upstream = np.zeros_like(q)
        upstream[np.arange(len(batch)), actions] = 2.0 * (picked - targets) / len(batch)
        grads = nn.backward(self.params, cache, upstream)
        nn.adamax_step(self.params, grads, lr)
        return loss

    def sync_target(self, tau):
        _soft_sync(self.target, self.params, tau)

    def decay_epsilon(self):
        self.epsilon = max(EPS_MIN, self.epsilon * EPS_DECAY)


class ActorCriticAgent:
    """Gaussian policy over continuous actions in [-1, 1] plus a state-value
    critic with its own target network."""

    def __init__(self, state_dim, action_dim, hidden=(64, 64), seed=0):
        rng = np.random.default_rng(seed)
        acts = ("relu",) * len(hidden) + ("identity",)
        self.actor = nn.GaussianNet(
            nn.init_network((state_dim, *hidden, 2 * action_dim), acts, rng)
        )
        self.critic = nn.init_network((state_dim, *hidden, 1), acts, rng)
        self.critic_target = self.critic.copy()
        self.action_dim = action_dim
        self.epsilon = 0.0  # exploration comes from the policy's own noise

    def policy_head(self, state) -> nn.GaussianHead:
        head, _ = self.actor.head_cached(state)
        return head

    def select_action(self, state, rng):
        head = self.policy_head(state)
        raw = head.mean + head.std * rng.standard_normal(self.action_dim)
        log_density = float(
            np.sum(
                -0.5 * np.log(2.0 * np.pi * head.std**2)
                - (raw - head.mean) ** 2 / (2.0 * head.std**2)
            )
        )
        return np.clip(raw, -1.0, 1.0), raw, log_density

    def train_step(self, batch, discount, lr, input_fn=concat_goal):
        states, next_states, rewards, terminals = _stack_batch(batch, input_fn)
        actions = np.stack([np.asarray(tr.action, dtype=np.float64) for tr in batch])
        n = len(batch)

        v_next = nn.forward(self.critic_target, next_states)[:, 0]
        targets = rewards + discount * v_next * (1.0 - terminals)

        v, v_cache = nn.forward_cached(self.critic, states)
        advantage = targets - v[:, 0]  # constant w.r.t. the actor
        critic_loss = float(np.mean(advantage**2))
        critic_up = (-2.0 * advantage / n)[:, None]
        nn.adamax_step(self.critic, nn.backward(self.critic, v_cache, critic_up), lr)

        mean, std, ctx = self.actor.forward_batch(states)
        logp = np.sum(
            -0.5 * np.log(2.0 * np.pi * std**2) - (actions - mean) ** 2 / (2.0 * std**2),
            axis=1,
        )
        actor_loss = float(np.mean(-logp * advantage))
        # d(-logp * adv)/dmean and /dstd, averaged over the batch
        coeff = (-advantage / n)[:, None]
        dmean = coeff * (actions - mean) / std**2
        dstd = coeff * ((actions - mean) ** 2 - std**2) / std**3
        nn.adamax_step(self.actor.params, self.actor.backward(ctx, dmean, dstd), lr)
        return actor_loss, critic_loss

    def sync_target(self, tau):
        _soft_sync(self.critic_target, self.critic, tau)

    def decay_epsilon(self):
        pass
