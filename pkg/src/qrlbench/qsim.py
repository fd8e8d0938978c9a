"""Dense statevector simulator for small parameterized circuits.

Supports RX/RY/RZ/CZ/CNOT gates, Pauli-Z product observables, analytic and
shot-based expectation estimation, parameter-shift gradients, and modeled
cost accounting (circuit executions and clock time in nanoseconds).

Qubit 0 is the most significant bit of the basis-state index.  All
observables are diagonal in the computational basis, so every observable of
a circuit is estimated from a single execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, UnboundParameterError, UnsupportedGradientError

ROTATION_KINDS = ("RX", "RY", "RZ")
TWO_QUBIT_KINDS = ("CZ", "CNOT")
MAX_QUBITS = 14
SHIFT = np.pi / 2.0

_KIND_CODES = {"RX": 0, "RY": 1, "RZ": 2, "CZ": 3, "CNOT": 4}


@dataclass(frozen=True)
class ParamRef:
    """Binds a gate angle to a trainable parameter: angle = multiplier * value."""

    param_id: str
    multiplier: float = 1.0


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: Optional[float] = None
    ref: Optional[ParamRef] = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in ROTATION_KINDS else 2
        if len(self.targets) != arity:
            raise ConfigurationError(
                f"{self.kind} takes {arity} target(s), got {self.targets}"
            )
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise ConfigurationError(f"{self.kind} targets must be distinct")
        if self.kind in ROTATION_KINDS and self.angle is None and self.ref is None:
            raise ConfigurationError(f"{self.kind} needs a fixed angle or a ParamRef")


@dataclass
class TimingModel:
    """Modeled hardware timing constants (nanoseconds) and shot count."""

    t_1q_ns: float = 30.0
    t_2q_ns: float = 300.0
    t_meas_ns: float = 300.0
    shots: int = 1000

    def __post_init__(self):
        if min(self.t_1q_ns, self.t_2q_ns, self.t_meas_ns) <= 0:
            raise ConfigurationError("gate durations must be positive")
        if self.shots < 1:
            raise ConfigurationError("shots must be >= 1")


@dataclass
class CostLedger:
    """Monotone counters for modeled quantum cost within one run."""

    circuit_executions: int = 0
    modeled_clock_time_ns: float = 0.0
    anneal_jobs: int = 0

    def charge_executions(self, count: int, time_ns_each: float) -> None:
        self.circuit_executions += count
        self.modeled_clock_time_ns += count * time_ns_each

    def charge_anneal(self, time_ns: float) -> None:
        self.anneal_jobs += 1
        self.modeled_clock_time_ns += time_ns

    def merge(self, other: "CostLedger") -> None:
        self.circuit_executions += other.circuit_executions
        self.modeled_clock_time_ns += other.modeled_clock_time_ns
        self.anneal_jobs += other.anneal_jobs


class Statevector:
    """Normalized complex amplitude vector over n qubits."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        if n_qubits > MAX_QUBITS:
            raise ConfigurationError(f"qubit count capped at {MAX_QUBITS}")
        if amplitudes.shape != (2**n_qubits,):
            raise ConfigurationError("amplitude length must be 2**n_qubits")
        self.n_qubits = n_qubits
        self.amplitudes = np.asarray(amplitudes, dtype=np.complex128)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class _Compiled:
    """Flat arrays describing a circuit, for fast batched evaluation."""

    __slots__ = (
        "n_qubits", "kinds", "t0", "t1", "pidx", "mult", "fixed",
        "param_ids", "obs_signs",
    )

    def __init__(self, circuit: "Circuit"):
        gates = circuit.gates
        n = circuit.n_qubits
        self.n_qubits = n
        g = len(gates)
        self.kinds = np.empty(g, dtype=np.int8)
        self.t0 = np.empty(g, dtype=np.int64)
        self.t1 = np.zeros(g, dtype=np.int64)
        self.pidx = np.full(g, -1, dtype=np.int64)
        self.mult = np.ones(g, dtype=np.float64)
        self.fixed = np.zeros(g, dtype=np.float64)
        ids: list[str] = []
        index: dict[str, int] = {}
        for i, gate in enumerate(gates):
            for t in gate.targets:
                if not 0 <= t < n:
                    raise IndexError(f"gate target {t} out of range for {n} qubits")
            self.kinds[i] = _KIND_CODES[gate.kind]
            self.t0[i] = gate.targets[0]
            if len(gate.targets) == 2:
                self.t1[i] = gate.targets[1]
            if gate.ref is not None:
                if gate.ref.param_id not in index:
                    index[gate.ref.param_id] = len(ids)
                    ids.append(gate.ref.param_id)
                self.pidx[i] = index[gate.ref.param_id]
                self.mult[i] = gate.ref.multiplier
            elif gate.angle is not None:
                self.fixed[i] = gate.angle
        self.param_ids = ids
        # Diagonal Z-product observables as +/-1 sign vectors over basis states.
        basis = np.arange(2**n, dtype=np.int64)
        signs = np.empty((len(circuit.observables), 2**n), dtype=np.float64)
        for k, obs in enumerate(circuit.observables):
            s = np.ones(2**n, dtype=np.float64)
            for q in obs:
                if not 0 <= q < n:
                    raise IndexError(f"observable target {q} out of range")
                bit = (basis >> (n - 1 - q)) & 1
                s *= 1.0 - 2.0 * bit
            signs[k] = s
        self.obs_signs = signs


@dataclass
class Circuit:
    """Ordered gate list plus Pauli-Z product observables."""

    n_qubits: int
    gates: list[Gate]
    observables: list[tuple[int, ...]]
    _compiled: Optional[_Compiled] = field(default=None, repr=False, compare=False)

    def compiled(self) -> _Compiled:
        if self._compiled is None:
            if self.n_qubits > MAX_QUBITS:
                raise ConfigurationError(f"qubit count capped at {MAX_QUBITS}")
            self._compiled = _Compiled(self)
        return self._compiled

    @property
    def param_ids(self) -> list[str]:
        return self.compiled().param_ids

    def gate_counts(self) -> tuple[int, int]:
        """(one-qubit, two-qubit) gate counts."""
        n1 = sum(1 for g in self.gates if g.kind in ROTATION_KINDS)
        return n1, len(self.gates) - n1


def _base_angles(comp: _Compiled, params: Mapping[str, float]) -> np.ndarray:
    angles = comp.fixed.copy()
    for pid in comp.param_ids:
        if pid not in params:
            raise UnboundParameterError(f"parameter {pid!r} is not bound")
    if comp.param_ids:
        vec = np.array([params[pid] for pid in comp.param_ids], dtype=np.float64)
        bound = comp.pidx >= 0
        angles[bound] = comp.mult[bound] * vec[comp.pidx[bound]]
    return angles


def _simulate_batch(comp: _Compiled, angles: np.ndarray) -> np.ndarray:
    """Evolve |0...0> under the circuit for each row of angles.

    angles: (B, n_gates).  Returns final amplitudes of shape (B, 2**n).
    """
    b, _ = angles.shape
    n = comp.n_qubits
    psi = np.zeros((b, 2**n), dtype=np.complex128)
    psi[:, 0] = 1.0
    view = psi.reshape((b,) + (2,) * n)
    _apply_compiled_to_view(comp, view, angles, n, b)
    return psi


def _expectations_from_probs(comp: _Compiled, probs: np.ndarray) -> np.ndarray:
    return probs @ comp.obs_signs.T


def apply_gate(state: Statevector, gate: Gate, angle: Optional[float] = None) -> Statevector:
    """Apply a single gate to a statevector; the unitary preserves the norm.

    For rotation gates `angle` overrides (or supplies) the gate angle.
    """
    circ = Circuit(state.n_qubits, [gate], [])
    comp = circ.compiled()
    if gate.kind in ROTATION_KINDS:
        if angle is None:
            angle = gate.angle
        if angle is None or not np.isfinite(angle):
            raise ConfigurationError("rotation gate needs a finite angle")
        angles = np.array([[angle]], dtype=np.float64)
    else:
        angles = np.zeros((1, 1), dtype=np.float64)
    n = state.n_qubits
    b = 1
    psi = state.amplitudes[None, :].copy()
    # Re-run the batched kernel on the provided state rather than |0>.
    view = psi.reshape((b,) + (2,) * n)
    _apply_compiled_to_view(comp, view, angles, n, b)
    return Statevector(n, psi[0])


def _apply_compiled_to_view(comp, view, angles, n, b):
    # In-place gate loop shared by _simulate_batch and apply_gate.
    bshape = (b,) + (1,) * (n - 1)
    for i in range(len(comp.kinds)):
        kind = comp.kinds[i]
        q = int(comp.t0[i])
        if kind <= 2:
            half = 0.5 * angles[:, i]
            sl0 = [slice(None)] * (n + 1)
            sl1 = [slice(None)] * (n + 1)
            sl0[q + 1] = 0
            sl1[q + 1] = 1
            a0 = view[tuple(sl0)]
            a1 = view[tuple(sl1)]
            if kind == 2:
                phase = np.exp(-1j * half).reshape(bshape)
                view[tuple(sl0)] = phase * a0
                view[tuple(sl1)] = np.conj(phase) * a1
            else:
                c = np.cos(half).reshape(bshape)
                s = np.sin(half).reshape(bshape)
                if kind == 0:
                    n0 = c * a0 - 1j * s * a1
                    n1 = -1j * s * a0 + c * a1
                else:
                    n0 = c * a0 - s * a1
                    n1 = s * a0 + c * a1
                view[tuple(sl0)] = n0
                view[tuple(sl1)] = n1
        else:
            q0, q1 = q, int(comp.t1[i])
            sl = [slice(None)] * (n + 1)
            sl[q0 + 1] = 1
            if kind == 3:
                sl[q1 + 1] = 1
                view[tuple(sl)] *= -1.0
            else:
                sla = list(sl)
                slb = list(sl)
                sla[q1 + 1] = 0
                slb[q1 + 1] = 1
                tmp = view[tuple(sla)].copy()
                view[tuple(sla)] = view[tuple(slb)]
                view[tuple(slb)] = tmp


def expectation(state: Statevector, observable: Sequence[int]) -> float:
    """Exact <Z...Z> over the given qubits; value lies in [-1, 1]."""
    n = state.n_qubits
    basis = np.arange(2**n, dtype=np.int64)
    signs = np.ones(2**n, dtype=np.float64)
    for q in observable:
        if not 0 <= q < n:
            raise IndexError(f"observable target {q} out of range")
        signs *= 1.0 - 2.0 * ((basis >> (n - 1 - q)) & 1)
    return float(np.dot(state.probabilities(), signs))


def sample_measurements(state: Statevector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Computational-basis outcome counts; counts sum to shots."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    probs = state.probabilities()
    probs = probs / probs.sum()
    return rng.multinomial(shots, probs)


def estimate_circuit_time(circuit: Circuit, timing: TimingModel) -> float:
    """Modeled execution time in ns: shots * (serial gate sum + measurement)."""
    n1, n2 = circuit.gate_counts()
    per_shot = n1 * timing.t_1q_ns + n2 * timing.t_2q_ns + timing.t_meas_ns
    return timing.shots * per_shot


def run_circuit(
    circuit: Circuit,
    params: Mapping[str, float],
    *,
    mode: str = "analytic",
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[CostLedger] = None,
    timing: Optional[TimingModel] = None,
) -> np.ndarray:
    """One execution: all observable expectations from a single prepared state."""
    comp = circuit.compiled()
    angles = _base_angles(comp, params)
    psi = _simulate_batch(comp, angles[None, :])
    probs = np.abs(psi[0]) ** 2
    timing = timing or TimingModel()
    if ledger is not None:
        ledger.charge_executions(1, estimate_circuit_time(circuit, timing))
    if mode == "analytic":
        return _expectations_from_probs(comp, probs[None, :])[0]
    if mode == "shots":
        if rng is None:
            raise ConfigurationError("shots mode requires an rng")
        counts = rng.multinomial(timing.shots, probs / probs.sum())
        freqs = counts / timing.shots
        return comp.obs_signs @ freqs
    raise ConfigurationError(f"unknown mode {mode!r}")


def parameter_shift_jacobian(
    circuit: Circuit,
    params: Mapping[str, float],
    *,
    ledger: Optional[CostLedger] = None,
    timing: Optional[TimingModel] = None,
) -> tuple[list[str], np.ndarray]:
    """d<O_k>/d(param) for every observable and circuit parameter.

    Uses the +/- pi/2 shift rule on each parameterized rotation; costs exactly
    two modeled executions per circuit parameter.
    Returns (param_ids, jacobian of shape (n_obs, n_params)).
    """
    comp = circuit.compiled()
    for i, k in enumerate(comp.kinds):
        if comp.pidx[i] >= 0 and k > 2:
            raise UnsupportedGradientError(
                "shift rule requires parameters to enter only rotation gates"
            )
    base = _base_angles(comp, params)
    pids = comp.param_ids
    occurrences: list[list[int]] = [[] for _ in pids]
    for i in range(len(comp.kinds)):
        if comp.pidx[i] >= 0:
            occurrences[comp.pidx[i]].append(i)
    rows = []
    for occ in occurrences:
        for g in occ:
            up = base.copy()
            up[g] += SHIFT
            down = base.copy()
            down[g] -= SHIFT
            rows.append(up)
            rows.append(down)
    n_obs = comp.obs_signs.shape[0]
    jac = np.zeros((n_obs, len(pids)))
    if rows:
        batch = np.stack(rows)
        psi = _simulate_batch(comp, batch)
        exps = _expectations_from_probs(comp, np.abs(psi) ** 2)
        row = 0
        for p, occ in enumerate(occurrences):
            for g in occ:
                jac[:, p] += comp.mult[g] * 0.5 * (exps[row] - exps[row + 1])
                row += 2
    timing = timing or TimingModel()
    if ledger is not None:
        ledger.charge_executions(len(rows), estimate_circuit_time(circuit, timing))
    return pids, jac


def parameter_shift_grad(
    circuit: Circuit,
    params: Mapping[str, float],
    loss_weights: Sequence[float],
    *,
    ledger: Optional[CostLedger] = None,
    timing: Optional[TimingModel] = None,
) -> dict[str, float]:
    """Gradient of sum_k loss_weights[k] * <O_k> w.r.t. every circuit parameter."""
    pids, jac = parameter_shift_jacobian(circuit, params, ledger=ledger, timing=timing)
    w = np.asarray(loss_weights, dtype=np.float64)
    if w.shape != (jac.shape[0],):
        raise ConfigurationError("loss_weights length must match observable count")
    grad = w @ jac
    return dict(zip(pids, grad.tolist()))
