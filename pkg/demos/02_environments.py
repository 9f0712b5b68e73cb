"""The three environments, and how rewards are handed out on request.

Every step returns a one-shot reward token instead of a bare number: the
training loop redeems it only when the confidence gate asks for feedback,
and the environment counts each redemption. peek() exists for metrics and
never touches the counter.
"""

import numpy as np

from cgr.envs import BitFlipEnv, KeyLockEnv, ParkingEnv, keylock_small

# --- key-lock gridworld: pick up keys, then open locks, avoid pits

env = keylock_small()
print("8x8 fixture grid ('.#PKLA' = floor/wall/pit/key/lock/agent):")
print(env.to_text())
print(f"features per state: {env.features().shape[0]}")
print(f"shortest solution:  {env.optimal_steps()} steps, "
      f"return {env.optimal_return()}")

# a generated 20x20 layout, reproducible from its seed
big = KeyLockEnv.generate(seed=7)
print(f"\ngenerated 20x20 layout: {big.to_text().count('K')} keys, "
      f"{big.to_text().count('P')} pits")

# --- reward tokens: redeem once, count once

env = keylock_small()
step = env.step(2)  # move east
print(f"\nafter one step east: peek = {step.reward_token.peek()}, "
      f"requests so far = {env.reward_requests}")
value = step.reward_token.redeem()
print(f"redeemed {value}; requests now = {env.reward_requests}")
try:
    step.reward_token.redeem()
except RuntimeError as e:
    print(f"second redeem refused: {e}")

# --- parking: continuous unicycle steering toward one of 30 goal spots

p = ParkingEnv(seed=0)
print(f"\nparking goal spot: {p.goal_features()}")
s = p.step(np.array([1.0, 0.0]))  # full throttle, no turn
print(f"one step: reward = {s.reward_token.peek():.4f} "
      f"(always negative, 0 only when parked)")

# --- bit flip: the classic sparse-reward HER testbed

b = BitFlipEnv(n_bits=8, seed=0)
print(f"\nbitflip start: {b.features().astype(int)}")
print(f"bitflip goal:  {b.goal_features().astype(int)}")
s = b.step(0)
print(f"flip bit 0 ->  {b.features().astype(int)}, "
      f"reward {s.reward_token.peek()}")
