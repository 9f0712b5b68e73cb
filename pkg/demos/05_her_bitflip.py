"""Hindsight experience replay on the bit-flip task.

With 8 bits the reward is almost always -1, so a plain agent rarely sees
the goal. HER relabels each episode's transitions with achieved future
states as goals (future strategy, k=4), turning failures into supervision.
"""

from collections import deque

import numpy as np

from cgr.buffers import Transition, her_relabel
from cgr.config import ExperimentConfig
from cgr.envs import BitFlipEnv
from cgr.trainer import Trainer

# --- what relabeling produces on a single hand-made episode

env = BitFlipEnv(n_bits=4, seed=0)
rng = np.random.default_rng(0)
episode = []
state = env.features()
goal = env.goal_features()
for a in (0, 1, 2):
    step = env.step(a)
    episode.append(Transition(state, a, step.reward_token.peek(),
                              step.terminal, step.next_state, goal=goal))
    state = step.next_state

extra = her_relabel(episode, k=4, rng=rng,
                    achieved_fn=env.achieved, goal_reward_fn=env.goal_reward)
print(f"episode of {len(episode)} steps -> {len(extra)} relabeled transitions")
rewarded = sum(t.reward == 0.0 for t in extra)
print(f"{rewarded} of them carry the goal-reached reward\n")

# --- training comparison: trailing success over the last 50 episodes


def trailing_success(her, episodes=600, seed=0):
    cfg = ExperimentConfig(env="bitflip", agent="dqn", her=her,
                           entropy_mode="off", episode_cap=episodes)
    t = Trainer(cfg, seed=seed)
    window = deque(maxlen=50)
    curve = []
    for _ in range(episodes):
        m = t.run_episode()
        window.append(m.ret > -13.0)  # failure always truncates at -13
        curve.append(np.mean(window))
    return curve


print("episode   success (HER)   success (no HER)")
with_her = trailing_success(her=True)
without = trailing_success(her=False)
for e in range(49, len(with_her), 50):
    print(f"{e + 1:7d}   {with_her[e]:13.2f}   {without[e]:16.2f}")
