import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_circuit(rng, max_qubits=6, max_gates=40):
    """Random circuit over the supported gate set, with fixed angles."""
    from qrlbench.qsim import Circuit, Gate

    n = int(rng.integers(1, max_qubits + 1))
    gates = []
    n_gates = int(rng.integers(1, max_gates + 1))
    for _ in range(n_gates):
        kind = rng.choice(["RX", "RY", "RZ", "CZ", "CNOT"]) if n >= 2 else rng.choice(["RX", "RY", "RZ"])
        if kind in ("CZ", "CNOT"):
            q0, q1 = rng.choice(n, size=2, replace=False)
            gates.append(Gate(kind, (int(q0), int(q1))))
        else:
            q = int(rng.integers(n))
            gates.append(Gate(kind, (q,), angle=float(rng.uniform(-np.pi, np.pi))))
    observables = [(int(rng.integers(n)),)]
    return Circuit(n, gates, observables)


# Dense-matrix oracle: build the full unitary by kron products, independent of
# the simulator's reshaping kernel.

def _gate_matrix(kind, angle=None):
    if kind == "RX":
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return np.array([[c, -s], [s, c]])
    if kind == "RZ":
        return np.diag([np.exp(-1j * angle / 2), np.exp(1j * angle / 2)])
    raise ValueError(kind)


def _embed_1q(mat, q, n):
    ops = [np.eye(2)] * n
    ops[q] = mat
    out = ops[0]
    for m in ops[1:]:
        out = np.kron(out, m)
    return out


def _embed_2q(kind, q0, q1, n):
    dim = 2**n
    u = np.eye(dim, dtype=complex)
    for i in range(dim):
        b0 = (i >> (n - 1 - q0)) & 1
        b1 = (i >> (n - 1 - q1)) & 1
        if kind == "CZ" and b0 and b1:
            u[i, i] = -1.0
        elif kind == "CNOT" and b0:
            j = i ^ (1 << (n - 1 - q1))
            u[i, i] = 0.0
            u[i, j] = 1.0
    return u


def dense_unitary(circuit, params=None):
    """Full 2^n x 2^n unitary of a circuit (params bound if given)."""
    n = circuit.n_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        if g.kind in ("CZ", "CNOT"):
            m = _embed_2q(g.kind, g.targets[0], g.targets[1], n)
        else:
            angle = g.angle
            if g.ref is not None:
                angle = g.ref.multiplier * params[g.ref.param_id]
            m = _embed_1q(_gate_matrix(g.kind, angle), g.targets[0], n)
        u = m @ u
    return u


def dense_expectations(circuit, params=None):
    """Observable expectations via the dense-unitary oracle."""
    n = circuit.n_qubits
    u = dense_unitary(circuit, params)
    psi = u[:, 0]
    probs = np.abs(psi) ** 2
    out = []
    for obs in circuit.observables:
        signs = np.ones(2**n)
        for q in obs:
            for i in range(2**n):
                if (i >> (n - 1 - q)) & 1:
                    signs[i] *= -1
        out.append(float(probs @ signs))
    return np.array(out)
