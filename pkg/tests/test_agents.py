import numpy as np
import pytest

from cgr import nn
from cgr.agents import ActorCriticAgent, DqnAgent
from cgr.buffers import Transition


def make_batch(entries):
    return [
        Transition(np.array(s, dtype=float), a, r, trm, np.array(s2, dtype=float))
        for s, a, r, trm, s2 in entries
    ]


def snapshot(params):
    return [(l.W.copy(), l.b.copy()) for l in params.layers]


def unchanged(params, snap):
    return all(
        np.array_equal(l.W, w) and np.array_equal(l.b, b)
        for l, (w, b) in zip(params.layers, snap)
    )


class TestDqnSelect:
    def test_greedy_argmax(self):
        agent = DqnAgent(2, 3, hidden=(4,), epsilon=0.0, seed=0)
        agent.q_values = lambda s: np.array([1.0, 5.0, 2.0])
        assert agent.select_action(np.zeros(2), np.random.default_rng(0)) == 1

    def test_tie_breaks_lowest_index(self):
        agent = DqnAgent(2, 2, hidden=(4,), epsilon=0.0, seed=0)
        agent.q_values = lambda s: np.array([5.0, 5.0])
        assert agent.select_action(np.zeros(2), np.random.default_rng(0)) == 0

    def test_full_exploration_uniform(self):
        agent = DqnAgent(2, 4, hidden=(4,), epsilon=1.0, seed=0)
        rng = np.random.default_rng(1)
        draws = 100_000
        counts = np.zeros(4)
        for _ in range(draws):
            counts[agent.select_action(np.zeros(2), rng)] += 1
        sigma = np.sqrt(draws * 0.25 * 0.75)
        assert np.all(np.abs(counts - draws / 4) < 3 * sigma)


class TestDqnTrain:
    def test_terminal_target_is_reward_alone(self):
        agent = DqnAgent(1, 2, hidden=(8,), seed=1)
        batch = make_batch([([0.5], 0, 3.0, True, [0.9])])
        # train many steps: Q(s, 0) must regress to r = 3 with no bootstrap
        for _ in range(600):
            agent.train_step(batch, discount=0.99, lr=0.01)
        assert abs(agent.q_values(np.array([0.5]))[0] - 3.0) < 0.05

    def test_target_network_frozen_during_step(self):
        agent = DqnAgent(2, 2, hidden=(8,), seed=2)
        snap = snapshot(agent.target)
        batch = make_batch([([0.1, 0.2], 1, -1.0, False, [0.3, 0.4])] * 4)
        agent.train_step(batch, discount=0.99, lr=0.005)
        assert unchanged(agent.target, snap)
        assert not unchanged(agent.params, snapshot(agent.target))

    def test_loss_matches_hand_computed_td_target(self):
        agent = DqnAgent(1, 2, hidden=(4,), seed=3)
        s, s2 = np.array([0.2]), np.array([0.7])
        batch = make_batch([([0.2], 0, 1.0, False, [0.7])])
        q = agent.q_values(s)
        q_next = nn.forward(agent.target, s2)
        target = 1.0 + 0.99 * q_next.max()
        expected_loss = (q[0] - target) ** 2
        loss = agent.train_step(batch, discount=0.99, lr=0.005)
        assert abs(loss - expected_loss) < 1e-10

    def test_absent_reward_rejected(self):
        agent = DqnAgent(1, 2, hidden=(4,), seed=0)
        batch = make_batch([([0.0], 0, None, False, [0.0])])
        with pytest.raises(ValueError):
            agent.train_step(batch, discount=0.99, lr=0.005)

    def test_chain_mdp_fixed_point(self):
        # 3-state deterministic chain: s0 -a0-> s1 -a0-> s2(terminal), r=1 each;
        # a1 self-loops with r=0. Value iteration: Q*(s1,a0)=1,
        # Q*(s0,a0)=1+0.9*1=1.9, Q*(s,a1)=0+0.9*Q*(s,max).
        states = {0: [1.0, 0.0, 0.0], 1: [0.0, 1.0, 0.0], 2: [0.0, 0.0, 1.0]}
        transitions = [
            (states[0], 0, 1.0, False, states[1]),
            (states[1], 0, 1.0, True, states[2]),
            (states[0], 1, 0.0, False, states[0]),
            (states[1], 1, 0.0, False, states[1]),
        ]
        batch = make_batch(transitions)
        agent = DqnAgent(3, 2, hidden=(16, 16), seed=5)
        rng = np.random.default_rng(0)
        for i in range(5000):
            sub = [batch[j] for j in rng.integers(4, size=8)]
            agent.train_step(sub, discount=0.9, lr=0.005)
            if i % 20 == 19:
                agent.sync_target(0.9)
        # analytic fixed point by value iteration
        q = np.zeros((2, 2))  # states 0,1 x actions
        for _ in range(200):
            v = q.max(axis=1)
            q = np.array([
                [1.0 + 0.9 * v[1], 0.9 * v[0]],
                [1.0, 0.9 * v[1]],
            ])
        got0 = agent.q_values(np.array(states[0]))
        got1 = agent.q_values(np.array(states[1]))
        assert np.allclose(got0, q[0], atol=1e-2)
        assert np.allclose(got1, q[1], atol=1e-2)


class TestEpsilon:
    def test_one_decay(self):
        agent = DqnAgent(1, 2, hidden=(4,), epsilon=1.0, seed=0)
        agent.decay_epsilon()
        assert agent.epsilon == 0.995

    def test_floor(self):
        agent = DqnAgent(1, 2, hidden=(4,), epsilon=0.01, seed=0)
        agent.decay_epsilon()
        assert agent.epsilon == 0.01

    def test_reaches_floor_by_2000(self):
        agent = DqnAgent(1, 2, hidden=(4,), epsilon=1.0, seed=0)
        previous = agent.epsilon
        for _ in range(2000):
            agent.decay_epsilon()
            assert agent.epsilon <= previous
            previous = agent.epsilon
        assert agent.epsilon == 0.01


class TestSyncTarget:
    def test_tau_zero_is_hard_copy(self):
        agent = DqnAgent(2, 2, hidden=(4,), seed=7)
        batch = make_batch([([0.1, 0.2], 0, 1.0, True, [0.0, 0.0])] * 2)
        agent.train_step(batch, 0.99, 0.01)
        agent.sync_target(0.0)
        assert unchanged(agent.target, snapshot(agent.params))

    def test_tau_one_is_noop(self):
        agent = DqnAgent(2, 2, hidden=(4,), seed=7)
        snap = snapshot(agent.target)
        batch = make_batch([([0.1, 0.2], 0, 1.0, True, [0.0, 0.0])] * 2)
        agent.train_step(batch, 0.99, 0.01)
        agent.sync_target(1.0)
        assert unchanged(agent.target, snap)

    def test_soft_blend_closed_form(self):
        agent = DqnAgent(1, 1, hidden=(2,), seed=9)
        learned = snapshot(agent.params)
        start = snapshot(agent.target)
        agent.sync_target(0.99)
        agent.sync_target(0.99)
        for (tw, _), (lw, _), (sw, _), layer in zip(
            snapshot(agent.target), learned, start, agent.target.layers
        ):
            expected = 0.99 * (0.99 * sw + 0.01 * lw) + 0.01 * lw
            assert np.allclose(layer.W, expected, atol=1e-14)


class TestActorCritic:
    def test_tiny_sigma_sample_near_mean(self):
        agent = ActorCriticAgent(2, 2, hidden=(8,), seed=0)
        mean = np.array([0.3, -0.2])
        agent.policy_head = lambda s: nn.GaussianHead(mean, np.full(2, nn.SIGMA_FLOOR))
        clipped, raw, _ = agent.select_action(np.zeros(2), np.random.default_rng(0))
        assert np.all(np.abs(raw - mean) < 5 * nn.SIGMA_FLOOR)

    def test_log_density_closed_form(self):
        agent = ActorCriticAgent(3, 2, hidden=(8,), seed=1)
        state = np.array([0.1, 0.2, 0.3])
        head = agent.policy_head(state)
        _, raw, logp = agent.select_action(state, np.random.default_rng(4))
        expected = np.sum(
            -0.5 * np.log(2 * np.pi * head.std**2)
            - (raw - head.mean) ** 2 / (2 * head.std**2)
        )
        assert abs(logp - expected) < 1e-12

    def test_empirical_mean_of_samples(self):
        agent = ActorCriticAgent(2, 1, hidden=(8,), seed=2)
        state = np.zeros(2)
        head = agent.policy_head(state)
        rng = np.random.default_rng(8)
        n = 100_000
        raws = np.array([agent.select_action(state, rng)[1][0] for _ in range(n)])
        assert abs(raws.mean() - head.mean[0]) < 3 * head.std[0] / np.sqrt(n)

    def test_zero_advantage_freezes_actor(self):
        agent = ActorCriticAgent(1, 1, hidden=(8,), seed=3)
        # choose rewards so target == V(s) exactly => advantage 0
        s = np.array([0.4])
        v = nn.forward(agent.critic, s)[0]
        v_next = nn.forward(agent.critic_target, s)[0]
        r = v - 0.99 * v_next
        batch = [Transition(s, np.array([0.2]), float(r), False, s)]
        snap = snapshot(agent.actor.params)
        agent.train_step(batch, discount=0.99, lr=0.01)
        assert unchanged(agent.actor.params, snap)

    def test_terminal_batch_regresses_value_to_reward(self):
        agent = ActorCriticAgent(1, 1, hidden=(8,), seed=4)
        s = np.array([0.5])
        batch = [Transition(s, np.array([0.0]), 2.0, True, s)]
        for _ in range(800):
            agent.train_step(batch, discount=0.99, lr=0.01)
        assert abs(nn.forward(agent.critic, s)[0] - 2.0) < 0.05

    def test_target_critic_frozen_during_step(self):
        agent = ActorCriticAgent(2, 1, hidden=(8,), seed=5)
        snap = snapshot(agent.critic_target)
        batch = [Transition(np.array([0.1, 0.2]), np.array([0.3]), 1.0, False,
                            np.array([0.2, 0.1]))]
        agent.train_step(batch, 0.99, 0.005)
        assert unchanged(agent.critic_target, snap)

    def test_actor_gradient_finite_difference(self):
        agent = ActorCriticAgent(2, 2, hidden=(6,), seed=6)
        s = np.array([0.3, -0.1])
        a = np.array([0.2, 0.4])
        batch = [Transition(s, a, 1.5, False, np.array([0.1, 0.1]))]

        # freeze the advantage at its pre-step value
        v_next = nn.forward(agent.critic_target, s.reshape(1, -1))[0, 0]
        v = nn.forward(agent.critic, s.reshape(1, -1))[0, 0]
        adv = 1.5 + 0.99 * v_next - v

        def actor_loss():
            head, _ = agent.actor.head_cached(s)
            logp = np.sum(
                -0.5 * np.log(2 * np.pi * head.std**2)
                - (a - head.mean) ** 2 / (2 * head.std**2)
            )
            return -logp * adv

        mean, std, ctx = agent.actor.forward_batch(s.reshape(1, -1))
        coeff = np.array([[-adv]])
        dmean = coeff * (a - mean) / std**2
        dstd = coeff * ((a - mean) ** 2 - std**2) / std**3
        analytic = agent.actor.backward(ctx, dmean, dstd)

        h = 1e-5
        rng = np.random.default_rng(0)
        for li, layer in enumerate(agent.actor.params.layers):
            flat = layer.W.reshape(-1)
            dflat = analytic[li][0].reshape(-1)
            for idx in rng.integers(flat.size, size=8):
                orig = flat[idx]
                flat[idx] = orig + h
                hi = actor_loss()
                flat[idx] = orig - h
                lo = actor_loss()
                flat[idx] = orig
                num = (hi - lo) / (2 * h)
                assert abs(dflat[idx] - num) / max(abs(num), 1e-6) < 1e-4

    def test_ac_decay_epsilon_noop(self):
        agent = ActorCriticAgent(1, 1, hidden=(4,), seed=0)
        agent.decay_epsilon()
        assert agent.epsilon == 0.0
