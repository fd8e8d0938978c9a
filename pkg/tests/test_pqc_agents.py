import numpy as np
import pytest

from conftest import dense_expectations
from qrlbench.ansatz import AnsatzSpec, ParamSet, build_circuit, encode_state
from qrlbench.envs import Transition
from qrlbench.pqc_agents import (
    QdqnAgent,
    QpgAgent,
    ReplayBuffer,
    linear_epsilon,
)
from qrlbench.qsim import CostLedger


def _spec(**kw):
    defaults = dict(n_qubits=4, n_actions=4, feature_dim=4, n_layers=2)
    defaults.update(kw)
    return AnsatzSpec(**defaults)


def _qdqn(rng, **kw):
    spec = _spec()
    return QdqnAgent(spec, ParamSet.initial(spec, rng), n_states=9, **kw)


def _qpg(rng, **kw):
    spec = _spec()
    return QpgAgent(spec, ParamSet.initial(spec, rng), n_states=9, **kw)


class TestQValues:
    def test_zero_circuit_gives_ones(self, rng):
        spec = _spec()
        params = ParamSet.initial(spec, rng)
        params.theta[:] = 0.0
        params.lam[:] = 0.0
        agent = QdqnAgent(spec, params, n_states=9)
        np.testing.assert_allclose(agent.q_values(3), np.ones(4), atol=1e-12)

    def test_w_scales_linearly(self, rng):
        agent = _qdqn(rng)
        base = agent.q_values(2) / agent.params.w
        agent.params.w = np.array([2.0, 1.0, 1.0, 1.0])
        scaled = agent.q_values(2)
        assert scaled[0] == pytest.approx(2.0 * base[0])
        np.testing.assert_allclose(scaled[1:], base[1:])

    def test_matches_dense_unitary_oracle(self, rng):
        agent = _qdqn(rng)
        for state in (0, 4, 8):
            circ = agent._cache.get(state)
            want = dense_expectations(circ, agent.params.as_mapping()) * agent.params.w
            got = agent.q_values(state)
            np.testing.assert_allclose(got, want, atol=1e-10)

    def test_one_execution_per_call(self, rng):
        agent = _qdqn(rng)
        ledger = CostLedger()
        agent.q_values(0, ledger=ledger)
        assert ledger.circuit_executions == 1


class TestEpsGreedy:
    def test_greedy_takes_argmax(self, rng):
        agent = _qdqn(rng)
        agent.q_values = lambda s, use_target=False, ledger=None: np.array([0.1, 0.9, 0.2, 0.2])
        assert agent.select_action_eps_greedy(0, 0.0, rng) == 1

    def test_tie_break_lowest_index(self, rng):
        agent = _qdqn(rng)
        agent.q_values = lambda s, use_target=False, ledger=None: np.array([0.5, 0.5, 0.1, 0.1])
        assert agent.select_action_eps_greedy(0, 0.0, rng) == 0

    def test_full_random_uniform(self, rng):
        agent = _qdqn(rng)
        draws = np.array(
            [agent.select_action_eps_greedy(0, 1.0, rng) for _ in range(10_000)]
        )
        counts = np.bincount(draws, minlength=4)
        # chi-square against uniform, 3 dof, 99.9% quantile ~ 16.3
        chi2 = np.sum((counts - 2500.0) ** 2 / 2500.0)
        assert chi2 < 16.3


class TestPolicy:
    def test_uniform_when_equal(self, rng):
        agent = _qpg(rng)
        probs, _, _ = agent._distribution(np.array([0.5, 0.5, 0.5, 0.5]))
        np.testing.assert_allclose(probs, 0.25, atol=1e-7)

    def test_ratio_positive_case(self, rng):
        agent = _qpg(rng, policy_mode="ratio")
        probs, _, _ = agent._distribution(np.array([0.2, 0.6, 0.1, 0.1]))
        np.testing.assert_allclose(probs, [0.2, 0.6, 0.1, 0.1], atol=1e-6)

    def test_softmax_closed_form(self, rng):
        agent = _qpg(rng, policy_mode="softmax")
        probs, _, _ = agent._distribution(np.array([1.0, 0.0, 0.0, 0.0]))
        e = np.e
        np.testing.assert_allclose(
            probs, [e / (e + 3), 1 / (e + 3), 1 / (e + 3), 1 / (e + 3)], atol=1e-12
        )

    @pytest.mark.parametrize("mode", ["ratio", "softmax"])
    def test_valid_distribution_random_params(self, rng, mode):
        agent = _qpg(rng, policy_mode=mode)
        for state in range(9):
            probs = agent.policy(state)
            assert np.all(probs >= 0)
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_w_scaling_argmax_invariance(self, rng):
        agent = _qpg(rng, policy_mode="softmax")
        exps = agent.expectations(3)
        before = np.argsort(exps * agent.params.w)
        agent.params.w = agent.params.w * 3.7
        after = np.argsort(exps * agent.params.w)
        np.testing.assert_array_equal(before, after)


class TestQpgUpdate:
    def _episode(self, rewards, states=None, actions=None):
        n = len(rewards)
        states = states or list(range(n))
        actions = actions or [0] * n
        eps = []
        for t in range(n):
            eps.append(
                Transition(states[t], actions[t], rewards[t], states[t], t == n - 1)
            )
        return eps

    def test_zero_return_no_change(self, rng):
        agent = _qpg(rng)
        theta0 = agent.params.theta.copy()
        w0 = agent.params.w.copy()
        agent.update(self._episode([0.0]))
        np.testing.assert_array_equal(agent.params.theta, theta0)
        np.testing.assert_array_equal(agent.params.w, w0)

    @pytest.mark.parametrize("mode", ["softmax", "ratio"])
    def test_log_policy_grad_matches_finite_difference(self, rng, mode):
        agent = _qpg(rng, policy_mode=mode)
        state, action = 2, 1
        exps = agent.expectations(state)
        coeff_e, coeff_w = agent._log_policy_coeffs(exps, action)
        circ = agent._cache.get(state)
        from qrlbench.qsim import parameter_shift_jacobian, run_circuit

        mapping = agent.params.as_mapping()
        ids, jac = parameter_shift_jacobian(circ, mapping)
        grad = dict(zip(ids, coeff_e @ jac))
        h = 1e-5

        def log_pi(m, w):
            e = run_circuit(circ, m)
            saved = agent.params.w
            agent.params.w = w
            probs, _, _ = agent._distribution(e)
            agent.params.w = saved
            return np.log(probs[action])

        for pid in list(ids)[:8]:
            up = dict(mapping)
            up[pid] += h
            down = dict(mapping)
            down[pid] -= h
            fd = (log_pi(up, agent.params.w) - log_pi(down, agent.params.w)) / (2 * h)
            assert grad[pid] == pytest.approx(fd, abs=1e-4)
        for a in range(4):
            wu = agent.params.w.copy()
            wu[a] += h
            wd = agent.params.w.copy()
            wd[a] -= h
            fd = (log_pi(mapping, wu) - log_pi(mapping, wd)) / (2 * h)
            assert coeff_w[a] == pytest.approx(fd, abs=1e-4)

    def test_deterministic_updates(self, rng):
        results = []
        for _ in range(2):
            agent = _qpg(np.random.default_rng(3))
            agent.update(self._episode([0.5, -0.2, 1.0]))
            results.append((agent.params.theta.copy(), agent.params.w.copy()))
        np.testing.assert_array_equal(results[0][0], results[1][0])
        np.testing.assert_array_equal(results[0][1], results[1][1])

    def test_ledger_two_p_per_distinct_state(self, rng):
        agent = _qpg(rng)
        p = agent.spec.n_circuit_params
        ledger = CostLedger()
        # 3 steps over 2 distinct states
        agent.update(self._episode([0.1, 0.2, 1.0], states=[0, 1, 0]), ledger=ledger)
        assert ledger.circuit_executions == 2 * (2 * p) + 2

    def test_incomplete_episode_rejected(self, rng):
        agent = _qpg(rng)
        with pytest.raises(ValueError):
            agent.update([Transition(0, 0, 0.0, 1, False)])
        with pytest.raises(ValueError):
            agent.update([])


class TestQdqnUpdate:
    def test_done_target_ignores_next_q(self, rng):
        agent = _qdqn(rng, batch_size=1, buffer_capacity=4)
        agent.push(Transition(0, 1, 1.0, 5, True))
        before = agent.q_values(0)
        assert agent.learn(rng)
        # moved toward y=1 on action 1 only: Q(0,1) closer to 1
        after = agent.q_values(0)
        assert abs(after[1] - 1.0) <= abs(before[1] - 1.0)

    def test_target_value_arithmetic(self, rng):
        agent = _qdqn(rng)
        agent.target.w = np.array([2.0, 1.0, 1.0, 1.0])
        exps = agent.q_values(3, use_target=True)
        # y = r + gamma * max target-Q
        y = 0.0 + 0.95 * np.max(exps)
        assert y == pytest.approx(0.95 * np.max(exps))

    def test_zero_lr_changes_nothing_but_ledger_grows(self, rng):
        agent = _qdqn(rng, lr_params=1e-300, lr_scaling=1e-300, batch_size=2, buffer_capacity=4)
        agent.push(Transition(0, 0, 0.5, 1, False))
        agent.push(Transition(1, 2, 0.0, 2, True))
        theta0 = agent.params.theta.copy()
        ledger = CostLedger()
        assert agent.learn(rng, ledger=ledger)
        np.testing.assert_allclose(agent.params.theta, theta0, atol=1e-250)
        assert ledger.circuit_executions > 0

    def test_underfilled_buffer_noop(self, rng):
        agent = _qdqn(rng)
        agent.push(Transition(0, 0, 0.0, 1, False))
        assert not agent.learn(rng)

    def test_target_stale_between_copies(self, rng):
        agent = _qdqn(rng, batch_size=1, buffer_capacity=8, target_update_interval=5)
        agent.push(Transition(0, 0, 0.3, 1, False))
        agent.push(Transition(1, 1, -0.1, 0, True))
        snapshots = []
        for _ in range(4):
            agent.learn(rng)
            snapshots.append(agent.q_values(2, use_target=True))
        for s in snapshots[1:]:
            np.testing.assert_array_equal(s, snapshots[0])
        agent.learn(rng)  # fifth step copies the target
        assert not np.array_equal(agent.q_values(2, use_target=True), snapshots[0])

    def test_td_loss_grad_matches_finite_difference(self, rng):
        from qrlbench.qsim import parameter_shift_jacobian, run_circuit

        agent = _qdqn(rng)
        tr = Transition(0, 2, 0.7, 1, True)
        mapping = agent.params.as_mapping()
        circ = agent._cache.get(0)
        exps = run_circuit(circ, mapping)
        y = tr.reward
        delta = exps[tr.action] * agent.params.w[tr.action] - y
        ids, jac = parameter_shift_jacobian(circ, mapping)
        grad = dict(zip(ids, 2.0 * delta * agent.params.w[tr.action] * jac[tr.action]))

        def loss(m):
            e = run_circuit(circ, m)
            return (e[tr.action] * agent.params.w[tr.action] - y) ** 2

        h = 1e-5
        for pid in list(ids)[:8]:
            up = dict(mapping)
            up[pid] += h
            down = dict(mapping)
            down[pid] -= h
            fd = (loss(up) - loss(down)) / (2 * h)
            assert grad[pid] == pytest.approx(fd, abs=1e-4)


class TestReplayBuffer:
    def test_uniform_sampling(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(capacity=10)
        for i in range(10):
            buf.push(Transition(i, 0, 0.0, 0, False))
        n = 100_000
        counts = np.zeros(10)
        for tr in buf.sample(n, rng):
            counts[tr.state] += 1
        # 3 sigma for binomial(n, 1/10)
        sigma = np.sqrt(n * 0.1 * 0.9)
        assert np.all(np.abs(counts - n / 10) < 3 * sigma + 1)

    def test_capacity_wraps(self):
        buf = ReplayBuffer(capacity=3)
        for i in range(5):
            buf.push(Transition(i, 0, 0.0, 0, False))
        assert len(buf) == 3
        states = {tr.state for tr in buf._items}
        assert states == {2, 3, 4}


class TestEpsilonSchedule:
    def test_endpoints(self):
        assert linear_epsilon(0, 1000) == 1.0
        assert linear_epsilon(500, 1000) == pytest.approx(0.05)
        assert linear_epsilon(1000, 1000) == pytest.approx(0.05)

    def test_monotone(self):
        vals = [linear_epsilon(t, 1000) for t in range(0, 1001, 50)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
