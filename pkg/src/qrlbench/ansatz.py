"""Layered hardware-efficient data-re-uploading circuits and feature encodings.

Each layer is: an encoding block of RX rotations carrying the (scaled) state
features, a variational block of RY+RZ rotations per qubit, and -- for the
``full`` variant only -- a CZ ring entangling block.  Two entanglement-free
variants exist for the classical-separability ablation:

* ``a_no_ent``: same layout with the CZ ring removed.
* ``b_no_ent_full_encoding``: no ring, and every qubit encodes the whole
  feature vector in each layer (one scaled RX per feature per qubit).

Features are mapped to {-1, +1} rather than {0, 1} so the input-scaling
parameters always receive gradient signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .qsim import Circuit, Gate, ParamRef

VARIANTS = ("full", "a_no_ent", "b_no_ent_full_encoding")
ENCODINGS = ("one_hot", "binary")


def feature_dim(encoding: str, n_states: int) -> int:
    if encoding == "one_hot":
        return n_states
    if encoding == "binary":
        return max(1, math.ceil(math.log2(n_states)))
    raise ConfigurationError(f"unknown encoding {encoding!r}")


def count_qubits(encoding: str, n_states: int, n_actions: int) -> int:
    """Qubits needed to encode the state and read one Z per action."""
    if n_states < 2:
        raise ConfigurationError("need at least 2 states")
    return max(feature_dim(encoding, n_states), n_actions)


def encode_state(encoding: str, state_index: int, n_states: int) -> np.ndarray:
    """State features in {-1, +1}: one-hot or most-significant-bit-first binary."""
    if not 0 <= state_index < n_states:
        raise ConfigurationError(f"state {state_index} out of range [0, {n_states})")
    if encoding == "one_hot":
        v = -np.ones(n_states)
        v[state_index] = 1.0
        return v
    if encoding == "binary":
        d = feature_dim(encoding, n_states)
        bits = [(state_index >> (d - 1 - i)) & 1 for i in range(d)]
        return np.array([2.0 * b - 1.0 for b in bits])
    raise ConfigurationError(f"unknown encoding {encoding!r}")


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_actions: int
    feature_dim: int
    n_layers: int = 5
    variant: str = "full"
    encoding: str = "binary"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown ansatz variant {self.variant!r}")
        if self.encoding not in ENCODINGS:
            raise ConfigurationError(f"unknown encoding {self.encoding!r}")
        if self.n_layers < 1 or self.n_qubits < 1:
            raise ConfigurationError("n_layers and n_qubits must be >= 1")
        if self.variant in ("full", "a_no_ent") and self.n_qubits < self.feature_dim:
            raise ConfigurationError(
                f"variant {self.variant!r} needs n_qubits >= feature_dim "
                f"({self.n_qubits} < {self.feature_dim})"
            )
        if self.n_qubits < self.n_actions:
            raise ConfigurationError(
                "single-qubit action readout needs n_qubits >= n_actions"
            )

    @property
    def lambda_shape(self) -> tuple[int, ...]:
        if self.variant == "b_no_ent_full_encoding":
            return (self.n_layers, self.n_qubits, self.feature_dim)
        return (self.n_layers, self.n_qubits)

    @property
    def theta_shape(self) -> tuple[int, ...]:
        return (self.n_layers, self.n_qubits, 2)

    @property
    def n_circuit_params(self) -> int:
        return int(np.prod(self.theta_shape) + np.prod(self.lambda_shape))


def _theta_id(layer: int, qubit: int, slot: int) -> str:
    return f"theta:{layer}:{qubit}:{slot}"


def _lambda_id(layer: int, qubit: int, feat: int | None = None) -> str:
    if feat is None:
        return f"lam:{layer}:{qubit}"
    return f"lam:{layer}:{qubit}:{feat}"


@dataclass
class ParamSet:
    """Trainable parameters: rotation angles, input scalings, output scalings."""

    theta: np.ndarray
    lam: np.ndarray
    w: np.ndarray

    @classmethod
    def initial(cls, spec: AnsatzSpec, rng: np.random.Generator) -> "ParamSet":
        # theta uniform in [-pi, pi]; scalings start at 1.
        theta = rng.uniform(-np.pi, np.pi, size=spec.theta_shape)
        lam = np.ones(spec.lambda_shape)
        w = np.ones(spec.n_actions)
        return cls(theta, lam, w)

    def copy(self) -> "ParamSet":
        return ParamSet(self.theta.copy(), self.lam.copy(), self.w.copy())

    def as_mapping(self) -> dict[str, float]:
        out: dict[str, float] = {}
        nl, nq, _ = self.theta.shape
        for l in range(nl):
            for q in range(nq):
                out[_theta_id(l, q, 0)] = float(self.theta[l, q, 0])
                out[_theta_id(l, q, 1)] = float(self.theta[l, q, 1])
        if self.lam.ndim == 2:
            for l in range(nl):
                for q in range(nq):
                    out[_lambda_id(l, q)] = float(self.lam[l, q])
        else:
            d = self.lam.shape[2]
            for l in range(nl):
                for q in range(nq):
                    for j in range(d):
                        out[_lambda_id(l, q, j)] = float(self.lam[l, q, j])
        return out

    def add_scaled(self, grads: dict[str, float], step: float) -> None:
        """In-place update of theta/lambda entries: value += step * grad[id]."""
        for pid, g in grads.items():
            parts = pid.split(":")
            if parts[0] == "theta":
                self.theta[int(parts[1]), int(parts[2]), int(parts[3])] += step * g
            elif parts[0] == "lam":
                if len(parts) == 3:
                    self.lam[int(parts[1]), int(parts[2])] += step * g
                else:
                    self.lam[int(parts[1]), int(parts[2]), int(parts[3])] += step * g
            else:
                raise ConfigurationError(f"unknown parameter id {pid!r}")


def build_circuit(spec: AnsatzSpec, features: np.ndarray) -> Circuit:
    """Construct the layered circuit for one feature vector.

    Deterministic: identical spec + features yield an identical gate list.
    Observables are single-qubit Z on qubits 0..n_actions-1.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (spec.feature_dim,):
        raise ConfigurationError(
            f"expected {spec.feature_dim} features, got {features.shape}"
        )
    gates: list[Gate] = []
    n, d = spec.n_qubits, spec.feature_dim
    for l in range(spec.n_layers):
        if spec.variant == "b_no_ent_full_encoding":
            for q in range(n):
                for j in range(d):
                    gates.append(
                        Gate("RX", (q,), ref=ParamRef(_lambda_id(l, q, j), float(features[j])))
                    )
        else:
            for q in range(n):
                gates.append(
                    Gate("RX", (q,), ref=ParamRef(_lambda_id(l, q), float(features[q % d])))
                )
        for q in range(n):
            gates.append(Gate("RY", (q,), ref=ParamRef(_theta_id(l, q, 0))))
            gates.append(Gate("RZ", (q,), ref=ParamRef(_theta_id(l, q, 1))))
        if spec.variant == "full" and n >= 2:
            # Ring of n CZ edges; for n == 2 both edges act on the same pair.
            for q in range(n):
                gates.append(Gate("CZ", (q, (q + 1) % n)))
    observables = [(a,) for a in range(spec.n_actions)]
    return Circuit(spec.n_qubits, gates, observables)
