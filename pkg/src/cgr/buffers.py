"""Transition stores: the replay buffer (rewards possibly absent), the
feedback buffer (rewards always present), and the hindsight relabeler."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

DEFAULT_CAPACITY = 40_000


@dataclass
class Transition:
    state: np.ndarray
    action: object  # int for discrete, array for continuous
    reward: Optional[float]
    terminal: bool
    next_state: np.ndarray
    goal: Optional[np.ndarray] = None


class RingBuffer:
    """Fixed-capacity FIFO; oldest entries evicted first."""

    requires_reward = False

    def __init__(self, capacity=DEFAULT_CAPACITY):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self):
        return len(self._items)

    def push(self, transition: Transition):
        if self.requires_reward and transition.reward is None:
            raise ValueError("feedback buffer requires a reward")
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size, rng) -> list[Transition]:
        """Uniform with replacement."""
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def items(self):
        """Contents oldest-first."""
        return self._items[self._cursor :] + self._items[: self._cursor]


class FeedbackBuffer(RingBuffer):
    """Ring buffer accepting only rewarded transitions."""

    requires_reward = True


def her_relabel(episode, k, rng, achieved_fn, goal_reward_fn):
    """Future-strategy hindsight relabeling.

    For each step t with at least one future step, emits k extra transitions
    whose goal is the achieved state of a uniformly drawn future step t' > t,
    with reward and terminal flag recomputed under that goal. Returns only the
    new transitions; callers keep the originals.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    relabeled = []
    n = len(episode)
    for t, tr in enumerate(episode):
        if tr.goal is None:
            raise ValueError("hindsight relabeling needs goal-conditioned transitions")
        if t + 1 >= n:
            continue  # no future step
        achieved_here = achieved_fn(tr.next_state)
        for _ in range(k):
            t_future = int(rng.integers(t + 1, n))
            new_goal = achieved_fn(episode[t_future].next_state)
            reward, done = goal_reward_fn(achieved_here, new_goal)
            relabeled.append(
                replace(tr, reward=reward, terminal=done, goal=new_goal)
            )
    return relabeled
