"""Policy-gradient and Q-learning agents over parameterized circuits.

QPG is episodic REINFORCE with discounted returns-to-go and no baseline.
QDQN is one-step Q-learning with a replay buffer and a periodically copied
target parameter set.  Both read one Q/policy value per action from
single-qubit Z observables scaled by trainable output weights, and train
with plain SGD at constant learning rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzSpec, ParamSet, build_circuit, encode_state
from .envs import Transition
from .errors import DegenerateDistributionError, NumericalGuardError
from .qsim import (
    Circuit,
    CostLedger,
    TimingModel,
    parameter_shift_jacobian,
    run_circuit,
)

RATIO_FLOOR = 1e-8

POLICY_MODES = ("ratio", "softmax")


class _CircuitCache:
    """Per-state circuits; rebuilding is deterministic so caching is safe."""

    def __init__(self, spec: AnsatzSpec, n_states: int):
        self.spec = spec
        self.n_states = n_states
        self._circuits: dict[int, Circuit] = {}

    def get(self, state: int) -> Circuit:
        circ = self._circuits.get(state)
        if circ is None:
            feats = encode_state(self.spec.encoding, state, self.n_states)
            circ = build_circuit(self.spec, feats)
            self._circuits[state] = circ
        return circ


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


class QpgAgent:
    """REINFORCE policy over scaled circuit expectations."""

    def __init__(
        self,
        spec: AnsatzSpec,
        params: ParamSet,
        n_states: int,
        *,
        gamma: float = 0.95,
        lr_params: float = 0.025,
        lr_scaling: float = 0.1,
        policy_mode: str = "ratio",
        timing: TimingModel | None = None,
    ):
        if policy_mode not in POLICY_MODES:
            raise ValueError(f"unknown policy mode {policy_mode!r}")
        if lr_params <= 0 or lr_scaling <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.spec = spec
        self.params = params
        self.gamma = gamma
        self.lr_params = lr_params
        self.lr_scaling = lr_scaling
        self.policy_mode = policy_mode
        self.timing = timing or TimingModel()
        self._cache = _CircuitCache(spec, n_states)

    def expectations(self, state: int, ledger: CostLedger | None = None) -> np.ndarray:
        return run_circuit(
            self._cache.get(state),
            self.params.as_mapping(),
            ledger=ledger,
            timing=self.timing,
        )

    def _distribution(self, exps: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Returns (probs, scaled values v, ratio shift c)."""
        v = exps * self.params.w
        if self.policy_mode == "softmax":
            return _softmax(v), v, 0.0
        c = max(0.0, -float(v.min())) + RATIO_FLOOR
        den = float(np.sum(v + c))
        if not np.isfinite(den) or den <= 0.0:
            raise DegenerateDistributionError(
                "ratio policy normalizer is not positive"
            )
        return (v + c) / den, v, c

    def policy(self, state: int, ledger: CostLedger | None = None) -> np.ndarray:
        probs, _, _ = self._distribution(self.expectations(state, ledger))
        return probs

    def select_action(
        self, state: int, rng: np.random.Generator, ledger: CostLedger | None = None
    ) -> int:
        probs = self.policy(state, ledger)
        return int(rng.choice(len(probs), p=probs))

    def _log_policy_coeffs(
        self, exps: np.ndarray, action: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """d log pi(action) / d exps and / d w (ratio shift held constant)."""
        probs, v, c = self._distribution(exps)
        if probs[action] < 1e-12:
            raise NumericalGuardError("chosen action has vanishing probability")
        n = len(probs)
        one_hot = np.zeros(n)
        one_hot[action] = 1.0
        if self.policy_mode == "softmax":
            dlog_dv = one_hot - probs
        else:
            den = float(np.sum(v + c))
            dlog_dv = one_hot / (v[action] + c) - 1.0 / den
        return dlog_dv * self.params.w, dlog_dv * exps

    def update(self, episode: list[Transition], ledger: CostLedger | None = None) -> None:
        """One REINFORCE ascent step from a complete episode."""
        if not episode or not episode[-1].done:
            raise ValueError("qpg update needs a non-empty terminal episode")
        returns = np.empty(len(episode))
        g = 0.0
        for t in range(len(episode) - 1, -1, -1):
            g = episode[t].reward + self.gamma * g
            returns[t] = g
        mapping = self.params.as_mapping()
        # One forward pass and one shift-rule Jacobian per distinct state.
        per_state: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        ids: list[str] = []
        for s in dict.fromkeys(tr.state for tr in episode):
            circ = self._cache.get(s)
            exps = run_circuit(circ, mapping, ledger=ledger, timing=self.timing)
            ids, jac = parameter_shift_jacobian(
                circ, mapping, ledger=ledger, timing=self.timing
            )
            per_state[s] = (exps, jac)
        grad_p = np.zeros(len(ids))
        grad_w = np.zeros_like(self.params.w)
        for tr, g_t in zip(episode, returns):
            exps, jac = per_state[tr.state]
            coeff_e, coeff_w = self._log_policy_coeffs(exps, tr.action)
            grad_p += g_t * (coeff_e @ jac)
            grad_w += g_t * coeff_w
        self.params.add_scaled(dict(zip(ids, grad_p.tolist())), self.lr_params)
        self.params.w += self.lr_scaling * grad_w


@dataclass
class ReplayBuffer:
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._cursor] = tr
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


class QdqnAgent:
    """Q-learning with replay and a fixed-weight target parameter set."""

    def __init__(
        self,
        spec: AnsatzSpec,
        params: ParamSet,
        n_states: int,
        *,
        gamma: float = 0.95,
        lr_params: float = 0.01,
        lr_scaling: float = 0.01,
        buffer_capacity: int = 10_000,
        batch_size: int = 16,
        target_update_interval: int = 25,
        timing: TimingModel | None = None,
    ):
        if buffer_capacity < batch_size:
            raise ValueError("buffer capacity must be >= batch size")
        if target_update_interval < 1:
            raise ValueError("target update interval must be >= 1")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.spec = spec
        self.params = params
        self.target = params.copy()
        self.gamma = gamma
        self.lr_params = lr_params
        self.lr_scaling = lr_scaling
        self.batch_size = batch_size
        self.target_update_interval = target_update_interval
        self.buffer = ReplayBuffer(buffer_capacity)
        self.timing = timing or TimingModel()
        self.learner_steps = 0
        self._cache = _CircuitCache(spec, n_states)

    def q_values(
        self, state: int, use_target: bool = False, ledger: CostLedger | None = None
    ) -> np.ndarray:
        pset = self.target if use_target else self.params
        exps = run_circuit(
            self._cache.get(state), pset.as_mapping(), ledger=ledger, timing=self.timing
        )
        return exps * pset.w

    def select_action_eps_greedy(
        self,
        state: int,
        eps: float,
        rng: np.random.Generator,
        ledger: CostLedger | None = None,
    ) -> int:
        if not 0.0 <= eps <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        # Random action with probability eps; argmax otherwise (ties -> lowest index).
        if rng.random() < eps:
            return int(rng.integers(self.spec.n_actions))
        return int(np.argmax(self.q_values(state, ledger=ledger)))

    def push(self, tr: Transition) -> None:
        self.buffer.push(tr)

    def learn(self, rng: np.random.Generator, ledger: CostLedger | None = None) -> bool:
        """One SGD step on a uniform replay batch; False if the buffer is short."""
        if len(self.buffer) < self.batch_size:
            return False
        batch = self.buffer.sample(self.batch_size, rng)
        mapping = self.params.as_mapping()
        target_mapping = self.target.as_mapping()
        grad_p = None
        grad_w = np.zeros_like(self.params.w)
        ids: list[str] = []
        for tr in batch:
            if tr.done:
                y = tr.reward
            else:
                next_circ = self._cache.get(tr.next_state)
                target_exps = run_circuit(
                    next_circ, target_mapping, ledger=ledger, timing=self.timing
                )
                y = tr.reward + self.gamma * float(np.max(target_exps * self.target.w))
            circ = self._cache.get(tr.state)
            exps = run_circuit(circ, mapping, ledger=ledger, timing=self.timing)
            ids, jac = parameter_shift_jacobian(
                circ, mapping, ledger=ledger, timing=self.timing
            )
            delta = float(exps[tr.action] * self.params.w[tr.action]) - y
            if grad_p is None:
                grad_p = np.zeros(len(ids))
            grad_p += 2.0 * delta * self.params.w[tr.action] * jac[tr.action]
            grad_w[tr.action] += 2.0 * delta * exps[tr.action]
        grad_p /= self.batch_size
        grad_w /= self.batch_size
        self.params.add_scaled(dict(zip(ids, grad_p.tolist())), -self.lr_params)
        self.params.w -= self.lr_scaling * grad_w
        self.learner_steps += 1
        if self.learner_steps % self.target_update_interval == 0:
            self.target = self.params.copy()
        return True


def linear_epsilon(step: int, budget: int, start: float = 1.0, end: float = 0.05) -> float:
    """Linear decay over the first half of the step budget, then constant."""
    horizon = max(1, budget // 2)
    frac = min(1.0, step / horizon)
    return start + frac * (end - start)
