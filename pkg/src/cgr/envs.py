"""Reward-on-request environments.

Stepping is always cheap; the scalar reward travels inside an opaque token
that must be redeemed explicitly. Unredeemed tokens are simply dropped, so
an agent that never asks never sees a reward value. Each environment counts
redemptions, which is the cost metric the whole experiment is about.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class RewardToken:
    """One-shot handle for a reward fixed at step time."""

    __slots__ = ("_value", "_env", "_redeemed")

    def __init__(self, value, env):
        self._value = float(value)
        self._env = env
        self._redeemed = False

    def redeem(self) -> float:
        if self._redeemed:
            raise RuntimeError("reward token redeemed twice")
        self._redeemed = True
        self._env.reward_requests += 1
        return self._value

    def peek(self) -> float:
        """Read the value without redeeming. Test/metrics use only: does not
        count as an environment reward request."""
        return self._value


@dataclass
class EnvStep:
    next_state: np.ndarray
    terminal: bool
    truncated: bool
    reward_token: RewardToken


def redeem_reward(token: RewardToken) -> float:
    return token.redeem()


class _RewardOnRequestEnv:
    def __init__(self):
        self.reward_requests = 0
        self._done = True

    def _token(self, value) -> RewardToken:
        return RewardToken(value, self)

    def _check_live(self):
        if self._done:
            raise RuntimeError("step called on a finished episode; reset first")


# ---------------------------------------------------------------------------
# Key-lock grid world
# ---------------------------------------------------------------------------

EMPTY, OBSTACLE, PIT, KEY, LOCK = 0, 1, 2, 3, 4
_CELL_CHARS = ".#PKL"

# N, S, E, W as (drow, dcol)
DIRECTIONS = ((-1, 0), (1, 0), (0, 1), (0, -1))
ACTION_NAMES = ("N", "S", "E", "W")

REWARD_KEY = 500.0
REWARD_LOCK = 1000.0
REWARD_PIT = -400.0
REWARD_STEP = -10.0

KEYLOCK_FEATURES = 26
KEYLOCK_MAX_STEPS = 100


class KeyLockEnv(_RewardOnRequestEnv):
    """Grid with keys, locks, pits and obstacles; 4 cardinal actions.

    Rewards: +500 per key, +1000 per lock (only after a key is in hand),
    -400 for a pit (terminal), -10 otherwise. Moving into an obstacle or off
    the grid leaves the position unchanged. Episodes truncate at 100 steps.
    """

    n_actions = len(DIRECTIONS)

    def __init__(self, grid, start, seed=None):
        super().__init__()
        self.grid = np.asarray(grid, dtype=np.int8)
        self.start = tuple(start)
        self.size = self.grid.shape[0]
        self.total_keys = int(np.sum(self.grid == KEY))
        self.total_locks = int(np.sum(self.grid == LOCK))
        self._rng = np.random.default_rng(seed)
        self.reset()

    # -- construction ------------------------------------------------------

    @classmethod
    def generate(cls, size=20, n_keys=2, n_locks=2, n_pits=8, n_obstacles=20, seed=0):
        """Seeded rejection sampling until the layout is solvable."""
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            grid = np.zeros((size, size), dtype=np.int8)
            cells = [(r, c) for r in range(size) for c in range(size)]
            picks = rng.choice(len(cells), size=1 + n_keys + n_locks + n_pits + n_obstacles, replace=False)
            it = iter(picks)
            start = cells[next(it)]
            for _ in range(n_keys):
                grid[cells[next(it)]] = KEY
            for _ in range(n_locks):
                grid[cells[next(it)]] = LOCK
            for _ in range(n_pits):
                grid[cells[next(it)]] = PIT
            for _ in range(n_obstacles):
                grid[cells[next(it)]] = OBSTACLE
            env = cls(grid, start, seed=seed)
            if env.optimal_steps() is not None:
                return env
        raise RuntimeError("could not sample a solvable layout")

    @classmethod
    def from_text(cls, text, seed=None):
        """Parse the plain-text grid format (`.#PKLA`, A marks the agent)."""
        rows = [line for line in text.strip().splitlines()]
        start = None
        grid = np.zeros((len(rows), len(rows[0])), dtype=np.int8)
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "A":
                    start = (r, c)
                elif ch in _CELL_CHARS:
                    grid[r, c] = _CELL_CHARS.index(ch)
                else:
                    raise ValueError(f"bad grid character {ch!r}")
        if start is None:
            raise ValueError("grid has no agent cell 'A'")
        return cls(grid, start, seed=seed)

    def to_text(self) -> str:
        lines = []
        for r in range(self.grid.shape[0]):
            row = "".join(_CELL_CHARS[self.grid[r, c]] for c in range(self.grid.shape[1]))
            lines.append(row)
        r, c = self.start
        lines[r] = lines[r][:c] + "A" + lines[r][c + 1 :]
        return "\n".join(lines)

    # -- episode control ---------------------------------------------------

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.pos = self.start
        self.keys_obtained = 0
        self.locks_opened = 0
        self.collected = set()  # cells whose key/lock has been consumed
        self.steps = 0
        self._done = False
        return self.features()

    def step(self, action) -> EnvStep:
        self._check_live()
        dr, dc = DIRECTIONS[action]
        r, c = self.pos[0] + dr, self.pos[1] + dc
        reward = REWARD_STEP
        terminal = False
        if not (0 <= r < self.grid.shape[0] and 0 <= c < self.grid.shape[1]) or self.grid[r, c] == OBSTACLE:
            r, c = self.pos  # no transition
        else:
            cell = self.grid[r, c]
            if cell == PIT:
                reward = REWARD_PIT
                terminal = True
            elif cell == KEY and (r, c) not in self.collected:
                reward = REWARD_KEY
                self.keys_obtained += 1
                self.collected.add((r, c))
            elif cell == LOCK and (r, c) not in self.collected and self.keys_obtained > self.locks_opened:
                reward = REWARD_LOCK
                self.locks_opened += 1
                self.collected.add((r, c))
        self.pos = (r, c)
        self.steps += 1
        if self.keys_obtained == self.total_keys and self.locks_opened == self.total_locks:
            terminal = True
        truncated = not terminal and self.steps >= KEYLOCK_MAX_STEPS
        self._done = terminal or truncated
        return EnvStep(self.features(), terminal, truncated, self._token(reward))

    # -- observation -------------------------------------------------------

    def _ray_distance(self, kind, direction):
        """Distance along a cardinal ray to the nearest uncollected cell of
        `kind`; grid size when the ray hits nothing."""
        dr, dc = direction
        r, c = self.pos
        for dist in range(1, self.size):
            rr, cc = r + dr * dist, c + dc * dist
            if not (0 <= rr < self.grid.shape[0] and 0 <= cc < self.grid.shape[1]):
                break
            if self.grid[rr, cc] == kind and (rr, cc) not in self.collected:
                return float(dist)
        return float(self.size)

    def features(self) -> np.ndarray:
        f = np.empty(KEYLOCK_FEATURES, dtype=np.float64)
        i = 0
        for kind in (KEY, LOCK):
            for d in DIRECTIONS:
                f[i] = self._ray_distance(kind, d)
                i += 1
        r, c = self.pos
        for dr, dc in DIRECTIONS:  # obstacle adjacency (border counts)
            rr, cc = r + dr, c + dc
            inside = 0 <= rr < self.grid.shape[0] and 0 <= cc < self.grid.shape[1]
            f[i] = 0.0 if inside and self.grid[rr, cc] != OBSTACLE else 1.0
            i += 1
        for dr, dc in DIRECTIONS:  # key-or-lock adjacency
            rr, cc = r + dr, c + dc
            inside = 0 <= rr < self.grid.shape[0] and 0 <= cc < self.grid.shape[1]
            hit = inside and self.grid[rr, cc] in (KEY, LOCK) and (rr, cc) not in self.collected
            f[i] = 1.0 if hit else 0.0
            i += 1
        for dr, dc in DIRECTIONS:  # pits one and two cells out
            for dist in (1, 2):
                rr, cc = r + dr * dist, c + dc * dist
                inside = 0 <= rr < self.grid.shape[0] and 0 <= cc < self.grid.shape[1]
                f[i] = 1.0 if inside and self.grid[rr, cc] == PIT else 0.0
                i += 1
        f[i] = float(self.keys_obtained)
        f[i + 1] = float(self.locks_opened)
        return f

    # -- scoring -----------------------------------------------------------

    def optimal_steps(self):
        """Fewest steps to collect every key and open every lock, by BFS over
        (position, collected-set) with the key-before-lock rule; None if the
        task is unsolvable."""
        items = sorted(
            (r, c)
            for r in range(self.grid.shape[0])
            for c in range(self.grid.shape[1])
            if self.grid[r, c] in (KEY, LOCK)
        )
        index = {cell: i for i, cell in enumerate(items)}
        full = (1 << len(items)) - 1
        start = (self.start, 0)
        seen = {start}
        queue = deque([(start, 0)])
        while queue:
            ((pos, mask), dist) = queue.popleft()
            if mask == full:
                return dist
            keys = sum(1 for cell, i in index.items() if mask >> i & 1 and self.grid[cell] == KEY)
            locks = sum(1 for cell, i in index.items() if mask >> i & 1 and self.grid[cell] == LOCK)
            for dr, dc in DIRECTIONS:
                r, c = pos[0] + dr, pos[1] + dc
                if not (0 <= r < self.grid.shape[0] and 0 <= c < self.grid.shape[1]):
                    continue
                cell = self.grid[r, c]
                if cell in (OBSTACLE, PIT):
                    continue
                new_mask = mask
                if cell == KEY and not mask >> index[(r, c)] & 1:
                    new_mask |= 1 << index[(r, c)]
                elif cell == LOCK and not mask >> index[(r, c)] & 1 and keys > locks:
                    new_mask |= 1 << index[(r, c)]
                state = ((r, c), new_mask)
                if state not in seen:
                    seen.add(state)
                    queue.append((state, dist + 1))
        return None

    def optimal_return(self) -> float:
        steps = self.optimal_steps()
        if steps is None:
            raise ValueError("layout is unsolvable")
        pickups = self.total_keys + self.total_locks
        return (
            REWARD_KEY * self.total_keys
            + REWARD_LOCK * self.total_locks
            + REWARD_STEP * (steps - pickups)
        )

    def score_range(self) -> float:
        # span between optimum and a do-nothing policy burning 100 steps
        return self.optimal_return() - REWARD_STEP * KEYLOCK_MAX_STEPS


# Fixed 8x8 fixture (1 key, 1 lock) used by the desk-scale experiments; its
# optimal return is hand-checkable by shortest-path search.
KEYLOCK_SMALL_FIXTURE = """\
A..#....
.#......
...#..#.
.K......
....#...
..#...#.
......L.
..P.#..P
"""


def keylock_small(seed=None) -> "KeyLockEnv":
    return KeyLockEnv.from_text(KEYLOCK_SMALL_FIXTURE, seed=seed)


# ---------------------------------------------------------------------------
# Parking lot (unicycle kinematics, goal-conditioned)
# ---------------------------------------------------------------------------

PARKING_SPOTS = 30
PARKING_MAX_STEPS = 100
PARKING_DT = 0.1
PARKING_V_MAX = 5.0
PARKING_OMEGA_MAX = 1.0
PARKING_LAMBDA = 0.3
PARKING_EPS_POS = 0.5
PARKING_EPS_HEADING = 0.15


def _wrap_angle(theta):
    """Normalize to (-pi, pi]."""
    out = (theta + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if out == -np.pi else out


class ParkingEnv(_RewardOnRequestEnv):
    """30-spot lot; the car starts at the center with a random heading and
    must reach a randomly chosen spot with the right orientation.

    Two continuous actions in [-1, 1]: velocity command and steering rate.
    Reward is -(position error / lot diagonal + 0.3 * heading error / pi),
    so 0 exactly at the goal pose and negative elsewhere.
    """

    action_dim = 2
    goal_dim = 4

    # two rows of 15 spots facing +y / -y
    _SPOT_X = [2.0 * (i - 7) for i in range(15)]
    _ROW_Y = (10.0, -10.0)

    def __init__(self, seed=None):
        super().__init__()
        self._rng = np.random.default_rng(seed)
        width = max(self._SPOT_X) - min(self._SPOT_X)
        height = self._ROW_Y[0] - self._ROW_Y[1]
        self.diagonal = float(np.hypot(width, height))
        self.reset()

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.x, self.y, self.v = 0.0, 0.0, 0.0
        self.heading = _wrap_angle(self._rng.uniform(-np.pi, np.pi))
        self.goal_spot = int(self._rng.integers(PARKING_SPOTS))
        row, col = divmod(self.goal_spot, 15)
        self.goal = np.array([self._SPOT_X[col], self._ROW_Y[row]])
        self.goal_heading = np.pi / 2.0 if row == 0 else -np.pi / 2.0
        self.steps = 0
        self._done = False
        return self.features()

    def _pose_error(self, x, y, heading):
        pos_err = float(np.hypot(x - self.goal[0], y - self.goal[1]))
        head_err = abs(_wrap_angle(heading - self.goal_heading))
        return pos_err, head_err

    def reward_at(self, x, y, heading) -> float:
        pos_err, head_err = self._pose_error(x, y, heading)
        return -(pos_err / self.diagonal + PARKING_LAMBDA * head_err / np.pi)

    def step(self, action) -> EnvStep:
        self._check_live()
        vel_cmd, steer = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        self.v = vel_cmd * PARKING_V_MAX
        self.x += self.v * np.cos(self.heading) * PARKING_DT
        self.y += self.v * np.sin(self.heading) * PARKING_DT
        self.heading = _wrap_angle(self.heading + steer * PARKING_OMEGA_MAX * PARKING_DT)
        self.steps += 1
        reward = self.reward_at(self.x, self.y, self.heading)
        pos_err, head_err = self._pose_error(self.x, self.y, self.heading)
        terminal = pos_err < PARKING_EPS_POS and head_err < PARKING_EPS_HEADING
        truncated = not terminal and self.steps >= PARKING_MAX_STEPS
        self._done = terminal or truncated
        return EnvStep(self.features(), terminal, truncated, self._token(reward))

    def features(self) -> np.ndarray:
        # angular-velocity slot kept at 0; the unicycle has no persistent
        # angular state between steps
        return np.array(
            [self.x, self.y, self.v, np.cos(self.heading), np.sin(self.heading), 0.0],
            dtype=np.float64,
        )

    def goal_features(self) -> np.ndarray:
        return np.array(
            [self.goal[0], self.goal[1], np.cos(self.goal_heading), np.sin(self.goal_heading)],
            dtype=np.float64,
        )

    def achieved(self, state_features) -> np.ndarray:
        x, y, cos_h, sin_h = state_features[0], state_features[1], state_features[3], state_features[4]
        return np.array([x, y, cos_h, sin_h], dtype=np.float64)

    def goal_reward(self, achieved, goal):
        """(reward, terminal) for an achieved pose under an arbitrary goal."""
        pos_err = float(np.hypot(achieved[0] - goal[0], achieved[1] - goal[1]))
        head_err = abs(_wrap_angle(np.arctan2(achieved[3], achieved[2]) - np.arctan2(goal[3], goal[2])))
        reward = -(pos_err / self.diagonal + PARKING_LAMBDA * head_err / np.pi)
        done = pos_err < PARKING_EPS_POS and head_err < PARKING_EPS_HEADING
        return reward, done

    def score_range(self) -> float:
        # optimum 0; the baseline is the expected return of standing still
        return abs(self.reward_at(0.0, 0.0, 0.0)) * PARKING_MAX_STEPS


# ---------------------------------------------------------------------------
# Bit flip (goal-conditioned HER stand-in)
# ---------------------------------------------------------------------------


class BitFlipEnv(_RewardOnRequestEnv):
    """Flip one bit per step until the vector matches the goal.

    Reward 0 on match, -1 otherwise; truncated after n + 5 steps.
    """

    def __init__(self, n_bits=8, seed=None):
        super().__init__()
        self.n_bits = n_bits
        self.n_actions = n_bits
        self.goal_dim = n_bits
        self._rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        while True:
            self.bits = self._rng.integers(0, 2, size=self.n_bits).astype(np.float64)
            self.goal = self._rng.integers(0, 2, size=self.n_bits).astype(np.float64)
            if not np.array_equal(self.bits, self.goal):
                break
        self.steps = 0
        self._done = False
        return self.features()

    def step(self, action) -> EnvStep:
        self._check_live()
        idx = int(action)
        if not 0 <= idx < self.n_bits:
            raise IndexError(f"flip index {idx} out of range")
        self.bits[idx] = 1.0 - self.bits[idx]
        self.steps += 1
        terminal = bool(np.array_equal(self.bits, self.goal))
        reward = 0.0 if terminal else -1.0
        truncated = not terminal and self.steps >= self.n_bits + 5
        self._done = terminal or truncated
        return EnvStep(self.features(), terminal, truncated, self._token(reward))

    def features(self) -> np.ndarray:
        return self.bits.copy()

    def goal_features(self) -> np.ndarray:
        return self.goal.copy()

    def achieved(self, state_features) -> np.ndarray:
        return np.asarray(state_features, dtype=np.float64).copy()

    def goal_reward(self, achieved, goal):
        done = bool(np.array_equal(achieved, goal))
        return (0.0 if done else -1.0), done

    def score_range(self) -> float:
        return float(self.n_bits + 5)
