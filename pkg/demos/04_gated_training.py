"""Feedback diminution end to end on the small key-lock fixture.

Trains two DQN agents on the same 8x8 grid: a plain baseline that
redeems every reward, and a gated agent (action + reward entropy, hyperbolic
regularizer) that only asks when unsure. The gated agent should reach a
comparable score while requesting far fewer environment rewards.

Takes a few minutes on one CPU; lower EPISODES for a quicker look.
"""

from cgr.config import ExperimentConfig
from cgr.trainer import train

EPISODES = 600
SEED = 0


def run(label, **kw):
    cfg = ExperimentConfig(env="keylock-small", agent="dqn",
                           episode_cap=EPISODES, **kw)
    res = train(cfg, seed=SEED)
    last = res.metrics[-1]
    print(f"\n--- {label}")
    if res.converged:
        print(f"converged at episode {res.converged_episode} "
              f"with score {res.converged_score:.1f}")
        print(f"environment rewards used to get there: "
              f"{res.rewards_to_converge}")
    else:
        print(f"did not converge within {EPISODES} episodes "
              f"(last return {last.ret:.0f})")
    print(f"total reward requests: {res.total_requests}")
    return res


baseline = run("plain DQN (requests every step)", entropy_mode="off")
gated = run("AE+RE with hyperbolic regularizer", entropy_mode="ae_re",
            reg="hyper")

if baseline.converged and gated.converged:
    ratio = gated.rewards_to_converge / baseline.rewards_to_converge
    print(f"\ngated agent converged using {ratio:.0%} of the baseline's "
          f"environment rewards")
