"""Grover-style amplitude-amplification agent with a TD(0) value table.

Each environment state owns a persistent m-qubit action register (m = 2 for
four actions) that starts in the uniform superposition.  Actions are chosen
by sampling the register's outcome distribution; the register is not
collapsed, it acts as a maintained per-state policy.  After a transition the
taken action's amplitude is amplified by L Grover iterations with
L = max(0, floor(k * (R + V(s')))), and V is updated by plain TD(0).

The Grover operator is G = D * O: O flips the phase of the taken action's
basis state, D reflects about the fixed uniform state.  Starting from
uniform, the marked probability follows sin^2((2L + 1) * theta0) with
sin^2(theta0) = 1 / 2^m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envs import Transition
from .errors import ConfigurationError
from .qsim import CostLedger, TimingModel

# Gate-equivalent counts for the modeled clock time (2-qubit registers):
# preparation is one Hadamard per qubit; each Grover iteration decomposes
# into 8 one-qubit gates and 1 two-qubit gate.
PREP_1Q_GATES = 2
GROVER_1Q_GATES_PER_ITER = 8
GROVER_2Q_GATES_PER_ITER = 1
# Action selection is a single prepared-and-measured run (one sample), not a
# shot-averaged expectation estimate.
SELECTION_SHOTS = 1


@dataclass
class ValueTable:
    n_states: int
    alpha: float = 0.1
    gamma: float = 0.95
    k: float = 1.5
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.k < 0:
            raise ConfigurationError("grover gain k must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in [0, 1]")
        if self.v is None:
            self.v = np.zeros(self.n_states)

    def td0_update(self, tr: Transition) -> None:
        v_next = 0.0 if tr.done else self.v[tr.next_state]
        delta = tr.reward + self.gamma * v_next - self.v[tr.state]
        self.v[tr.state] += self.alpha * delta


def compute_L(k: float, reward: float, v_next: float) -> int:
    if not (math.isfinite(reward) and math.isfinite(v_next)):
        raise ValueError("reward and next value must be finite")
    return max(0, math.floor(k * (reward + v_next)))


def uniform_register(m: int = 2) -> np.ndarray:
    return np.full(2**m, 2.0 ** (-m / 2.0))


def grover_step(register: np.ndarray, action: int) -> np.ndarray:
    """One application of G = D * O on the taken action."""
    n = len(register)
    out = register.copy()
    out[action] = -out[action]
    # reflection about the uniform state: 2|u><u| - I
    mean_proj = 2.0 * out.sum() / n
    return mean_proj - out


def grover_update(register: np.ndarray, action: int, L: int) -> tuple[np.ndarray, int]:
    """Apply up to L Grover iterations, capped before p(action) decreases.

    Returns the new register and the number of iterations actually applied.
    """
    if not 0 <= action < len(register):
        raise ConfigurationError(f"action {action} out of range")
    applied = 0
    for _ in range(L):
        candidate = grover_step(register, action)
        if candidate[action] ** 2 < register[action] ** 2:
            break
        register = candidate
        applied += 1
    return register, applied


class AaAgent:
    """Persistent per-state registers plus a TD(0) table driving Grover gains."""

    def __init__(
        self,
        n_states: int,
        n_actions: int = 4,
        *,
        alpha: float = 0.1,
        gamma: float = 0.95,
        k: float = 1.5,
        timing: TimingModel | None = None,
    ):
        m = max(1, math.ceil(math.log2(n_actions)))
        if 2**m != n_actions:
            raise ConfigurationError("register needs a power-of-two action count")
        self.m = m
        self.n_actions = n_actions
        self.values = ValueTable(n_states, alpha=alpha, gamma=gamma, k=k)
        self.registers = np.tile(uniform_register(m), (n_states, 1))
        self.iterations = np.zeros(n_states, dtype=np.int64)
        self.timing = timing or TimingModel()

    def action_probabilities(self, state: int) -> np.ndarray:
        amps = self.registers[state]
        return amps**2 / float(amps @ amps)

    def _selection_time_ns(self, state: int) -> float:
        t = self.timing
        n1 = PREP_1Q_GATES + GROVER_1Q_GATES_PER_ITER * int(self.iterations[state])
        n2 = GROVER_2Q_GATES_PER_ITER * int(self.iterations[state])
        return SELECTION_SHOTS * (n1 * t.t_1q_ns + n2 * t.t_2q_ns + t.t_meas_ns)

    def select_action(
        self, state: int, rng: np.random.Generator, ledger: CostLedger | None = None
    ) -> int:
        probs = self.action_probabilities(state)
        if ledger is not None:
            ledger.charge_executions(1, self._selection_time_ns(state))
        return int(rng.choice(self.n_actions, p=probs))

    def observe(self, tr: Transition) -> None:
        """Amplify the taken action, then TD(0) on the value table."""
        v_next = 0.0 if tr.done else float(self.values.v[tr.next_state])
        L = compute_L(self.values.k, tr.reward, v_next)
        if L > 0:
            reg, applied = grover_update(self.registers[tr.state], tr.action, L)
            self.registers[tr.state] = reg
            self.iterations[tr.state] += applied
        self.values.td0_update(tr)
