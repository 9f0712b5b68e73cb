"""Training loop: action selection, confidence gating, buffer routing,
reward-model and agent updates, episode-boundary syncs, convergence."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import envs, nn
from .agents import ActorCriticAgent, DqnAgent
from .buffers import FeedbackBuffer, RingBuffer, Transition, her_relabel
from .confidence import (
    ConfidenceGate,
    discrete_action_entropy,
    gaussian_differential_entropy,
)
from .config import GOAL_CONDITIONED, ExperimentConfig
from .reward_model import RewardModelPair


@dataclass
class EpisodeMetrics:
    episode: int
    ret: float  # true environment return (metrics only; not agent-visible)
    steps: int
    requests: int
    cum_requests: int


@dataclass
class StepRecord:
    episode: int
    step: int
    action: object
    requested: bool
    fused_conf: float
    reg_mult: float
    n: int
    reward_or_imputed: float
    source: str  # "env" or "model"


@dataclass
class RunResult:
    metrics: list
    converged: bool
    converged_episode: Optional[int]
    converged_score: Optional[float]
    rewards_to_converge: Optional[int]
    total_requests: int
    agent_updates: int
    steps_log: list = field(default_factory=list)


class ConvergenceDetector:
    """Fires once five episode scores land within 5% of the highest possible
    score; reports the average of those five and the reward cost so far."""

    def __init__(self, highest_score, score_range=None, fraction=0.05, needed=5):
        if highest_score > 0:
            self.threshold = highest_score * (1.0 - fraction)
        else:
            if score_range is None:
                raise ValueError("negative-scale environments need a score range")
            self.threshold = highest_score - fraction * abs(score_range)
        self.needed = needed
        self.qualifying: list[float] = []
        self.converged = False

    def update(self, score) -> bool:
        if not self.converged and score >= self.threshold:
            self.qualifying.append(score)
            if len(self.qualifying) >= self.needed:
                self.converged = True
        return self.converged

    @property
    def converged_score(self):
        return float(np.mean(self.qualifying)) if self.converged else None


def make_env(config: ExperimentConfig, rng: np.random.Generator):
    if config.env == "keylock":
        env = envs.KeyLockEnv.generate(size=20, n_keys=2, n_locks=2, n_pits=8,
                                       n_obstacles=20, seed=config.layout_seed)
    elif config.env == "keylock-small":
        env = envs.keylock_small()
    elif config.env == "parking":
        env = envs.ParkingEnv(seed=rng.integers(2**31))
    elif config.env == "bitflip":
        env = envs.BitFlipEnv(n_bits=config.n_bits, seed=rng.integers(2**31))
    else:
        raise ValueError(config.env)
    return env


def highest_score(config: ExperimentConfig, env) -> tuple[float, float]:
    """(highest possible score, score range) for the convergence detector."""
    if config.env in ("keylock", "keylock-small"):
        return env.optimal_return(), env.score_range()
    return 0.0, env.score_range()


class Trainer:
    def __init__(self, config: ExperimentConfig, seed, trace=False, log_steps=False):
        self.config = config
        self.seed = seed
        self.trace_enabled = trace
        self.log_steps = log_steps
        self.trace: list[str] = []

        ss = np.random.SeedSequence([seed, 0xC0FFEE])
        env_seed, agent_seed, rm_seed, act_seed, sample_seed, gate_seed = ss.spawn(6)
        self.env_rng = np.random.default_rng(env_seed)
        self.action_rng = np.random.default_rng(act_seed)
        self.sample_rng = np.random.default_rng(sample_seed)
        self.gate_rng = np.random.default_rng(gate_seed)

        self.env = make_env(config, self.env_rng)
        self.goal_conditioned = config.env in GOAL_CONDITIONED
        state_dim = len(self.env.reset(seed=int(self.env_rng.integers(2**31))))
        goal_dim = self.env.goal_dim if self.goal_conditioned else 0
        in_dim = state_dim + goal_dim

        agent_rng_seed = int(np.random.default_rng(agent_seed).integers(2**31))
        if config.agent == "dqn":
            self.agent = DqnAgent(in_dim, self.env.n_actions, hidden=config.agent_hidden,
                                  epsilon=config.epsilon, seed=agent_rng_seed)
            self.discrete = True
            action_dim = self.env.n_actions
        else:
            self.agent = ActorCriticAgent(in_dim, self.env.action_dim,
                                          hidden=config.agent_hidden, seed=agent_rng_seed)
            self.discrete = False
            action_dim = self.env.action_dim

        self.reward_model = None
        if config.gating_enabled:
            rm_rng_seed = int(np.random.default_rng(rm_seed).integers(2**31))
            self.reward_model = RewardModelPair(
                in_dim, action_dim, discrete_actions=self.discrete,
                hidden=config.reward_hidden, seed=rm_rng_seed,
            )

        self.gate = ConfidenceGate(
            entropy_mode=config.entropy_mode, reg_mode=config.reg, nu=config.nu,
            cthresh=config.cthresh, constant_conf_zero=config.constant_conf_zero,
        )

        self.rb = RingBuffer(config.buffer_size)
        self.fb = FeedbackBuffer(config.buffer_size)

        detector_env = self.env
        high, span = highest_score(config, detector_env)
        self.highest = high
        self.detector = ConvergenceDetector(high, score_range=span)

        self.episode_index = 0
        self.cum_requests = 0
        self.agent_updates = 0
        self.metrics: list[EpisodeMetrics] = []
        self.steps_log: list[StepRecord] = []

    # -- helpers -----------------------------------------------------------

    def _record(self, op):
        if self.trace_enabled:
            self.trace.append(op)

    def _agent_input(self, state, goal):
        if goal is None:
            return state
        return np.concatenate([state, goal])

    def _select_action(self, agent_in):
        if self.discrete:
            q = self.agent.q_values(agent_in)
            if self.action_rng.random() < self.agent.epsilon:
                action = int(self.action_rng.integers(self.agent.n_actions))
            else:
                action = int(np.argmax(q))
            return action, q, None
        clipped, _raw, _logp = self.agent.select_action(agent_in, self.action_rng)
        return clipped, None, self.agent.policy_head(agent_in)

    def _confidence(self, agent_in, action, q, policy_head, goal):
        cfg = self.config
        action_entropy = reward_entropy = None
        if cfg.entropy_mode in ("ae", "ae_re"):
            if self.discrete:
                action_entropy = discrete_action_entropy(q)
            else:
                action_entropy = gaussian_differential_entropy(policy_head)
        if cfg.entropy_mode == "ae_re":
            # the goal is already folded into agent_in
            head = self.reward_model.predict(agent_in, action)
            reward_entropy = gaussian_differential_entropy(head)
        return self.gate.evaluate(action_entropy, reward_entropy, rng=self.gate_rng)

    # -- core loop ---------------------------------------------------------

    def run_episode(self) -> EpisodeMetrics:
        cfg = self.config
        env = self.env
        state = env.reset(seed=int(self.env_rng.integers(2**31)))
        goal = env.goal_features() if self.goal_conditioned else None
        episode_transitions = []
        ep_return = 0.0
        ep_requests = 0
        steps = 0
        done = False

        while not done:
            agent_in = self._agent_input(state, goal)
            action, q, policy_head = self._select_action(agent_in)
            self._record("select")
            report = self._confidence(agent_in, action, q, policy_head, goal)
            self._record("confidence")
            step = env.step(action)
            self._record("env_step")

            true_reward = step.reward_token.peek()  # metrics only
            if report.request_reward:
                reward = step.reward_token.redeem()
                ep_requests += 1
                self.cum_requests += 1
            else:
                reward = None
            self._record("gate_request" if report.request_reward else "gate_skip")

            tr = Transition(state, action, reward, step.terminal, step.next_state, goal)
            if reward is not None:
                self.fb.push(tr)
                self._record("store_fb")
            self.rb.push(tr)
            self._record("store_rb")
            episode_transitions.append(tr)

            if cfg.gating_enabled and len(self.fb) > 0:
                batch = self.fb.sample(cfg.batch_size, self.sample_rng)
                self.reward_model.train(batch, cfg.alpha)
                self._record("rm_update")

            batch = self.rb.sample(cfg.batch_size, self.sample_rng)
            if cfg.gating_enabled:
                batch = self.reward_model.impute(
                    batch, sample=cfg.impute_sample, rng=self.sample_rng
                )
                self._record("impute")
            self.agent.train_step(batch, cfg.delta, cfg.alpha)
            self.agent_updates += 1
            self._record("agent_update")

            if self.log_steps:
                if reward is not None:
                    logged, source = reward, "env"
                elif cfg.gating_enabled:
                    head = self.reward_model.predict(agent_in, action, None)
                    logged, source = float(head.mean[0]), "model"
                else:
                    logged, source = float("nan"), "none"
                self.steps_log.append(StepRecord(
                    self.episode_index, steps, action, report.request_reward,
                    report.fused_confidence, report.regularizer,
                    report.steps_since_reward, logged, source,
                ))

            ep_return += true_reward
            state = step.next_state
            steps += 1
            done = step.terminal or step.truncated

        if cfg.her and len(episode_transitions) > 1:
            extra = her_relabel(
                episode_transitions, cfg.her_k, self.sample_rng,
                env.achieved, env.goal_reward,
            )
            for tr in extra:
                self.rb.push(tr)
                if cfg.her_rewards_to_fb and cfg.gating_enabled:
                    self.fb.push(tr)
            self._record("her_relabel")

        if cfg.gating_enabled:
            self.reward_model.sync()
            self._record("rm_sync")
        self.agent.sync_target(0.0 if cfg.hard_target_copy else cfg.tau)
        self._record("target_sync")
        self.agent.epsilon = max(cfg.eps_min, self.agent.epsilon * cfg.eps_decay)
        self._record("eps_decay")

        m = EpisodeMetrics(self.episode_index, ep_return, steps, ep_requests, self.cum_requests)
        self.metrics.append(m)
        self.episode_index += 1
        return m

    def train(self) -> RunResult:
        cfg = self.config
        converged_episode = rewards_to_converge = None
        for _ in range(cfg.episode_cap):
            m = self.run_episode()
            if self.detector.update(m.ret) and converged_episode is None:
                converged_episode = m.episode
                rewards_to_converge = self.cum_requests
                break
        return RunResult(
            metrics=self.metrics,
            converged=self.detector.converged,
            converged_episode=converged_episode,
            converged_score=self.detector.converged_score,
            rewards_to_converge=rewards_to_converge,
            total_requests=self.cum_requests,
            agent_updates=self.agent_updates,
            steps_log=self.steps_log,
        )


def train(config: ExperimentConfig, seed, trace=False, log_steps=False) -> RunResult:
    return Trainer(config, seed, trace=trace, log_steps=log_steps).train()
