"""Free-energy Q-learning with clamped deep Boltzmann machines.

The function approximator is a clamped DBM whose visible nodes carry the
encoded (state, action) pair in {-1, +1} and whose hidden nodes form layered
DBM connectivity (visible <-> first hidden layer, successive hidden layers
only).  Adding a transverse field of strength ``big_gamma`` on the hidden
spins turns it into a clamped QBM; its negative equilibrium free energy is
the Q-value.

Free energies are estimated either exactly (enumeration for the classical
model, dense diagonalization for the quantum one) or by simulated annealing
on the replica-stacked classical image of the quantum Hamiltonian.

Sign convention used throughout: the energy of a spin configuration s is
E(s) = -h.s - 1/2 s^T J s with symmetric zero-diagonal couplings J, so a
positive field favours spin +1 and a positive coupling favours alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ansatz import encode_state, feature_dim
from .envs import Transition
from .errors import ConfigurationError
from .qsim import CostLedger

MAX_ENUM_HIDDEN = 12
MAX_DIAG_HIDDEN = 10
DEFAULT_ANNEAL_TIME_NS = 115e6  # one annealer job, regardless of problem size


@dataclass
class QbmModel:
    """Clamped (Q)BM weights plus the (Gamma, beta) thermodynamic constants."""

    n_states: int
    n_actions: int
    encoding: str = "one_hot"
    hidden_layers: tuple[int, ...] = (4, 4)
    big_gamma: float = 0.506
    beta: float = 2.0
    theta_vh: np.ndarray = field(default=None)  # (n_visible, first hidden layer)
    theta_hh: list[np.ndarray] = field(default=None)  # one block per layer pair

    def __post_init__(self):
        if self.big_gamma < 0:
            raise ConfigurationError("transverse field strength must be >= 0")
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if not self.hidden_layers:
            raise ConfigurationError("need at least one hidden layer")
        if self.theta_vh is None:
            self.theta_vh = np.zeros((self.n_visible, self.hidden_layers[0]))
        if self.theta_hh is None:
            self.theta_hh = [
                np.zeros((a, b))
                for a, b in zip(self.hidden_layers, self.hidden_layers[1:])
            ]
        if self.theta_vh.shape != (self.n_visible, self.hidden_layers[0]):
            raise ConfigurationError("theta_vh shape mismatch")
        for k, block in enumerate(self.theta_hh):
            if block.shape != (self.hidden_layers[k], self.hidden_layers[k + 1]):
                raise ConfigurationError(f"theta_hh block {k} shape mismatch")

    @property
    def n_visible(self) -> int:
        return feature_dim(self.encoding, self.n_states) + self.n_actions

    @property
    def n_hidden(self) -> int:
        return sum(self.hidden_layers)

    @property
    def layer_offsets(self) -> list[int]:
        offs = [0]
        for size in self.hidden_layers:
            offs.append(offs[-1] + size)
        return offs

    @classmethod
    def initial(
        cls,
        n_states: int,
        n_actions: int,
        rng: np.random.Generator,
        *,
        encoding: str = "one_hot",
        hidden_layers: tuple[int, ...] = (4, 4),
        big_gamma: float = 0.506,
        beta: float = 2.0,
        scale: float = 0.1,
    ) -> "QbmModel":
        model = cls(
            n_states=n_states,
            n_actions=n_actions,
            encoding=encoding,
            hidden_layers=tuple(hidden_layers),
            big_gamma=big_gamma,
            beta=beta,
        )
        model.theta_vh = rng.normal(0.0, scale, size=model.theta_vh.shape)
        model.theta_hh = [rng.normal(0.0, scale, size=b.shape) for b in model.theta_hh]
        return model

    def copy(self) -> "QbmModel":
        return QbmModel(
            n_states=self.n_states,
            n_actions=self.n_actions,
            encoding=self.encoding,
            hidden_layers=self.hidden_layers,
            big_gamma=self.big_gamma,
            beta=self.beta,
            theta_vh=self.theta_vh.copy(),
            theta_hh=[b.copy() for b in self.theta_hh],
        )

    def visible_vector(self, state: int, action: int) -> np.ndarray:
        if not 0 <= action < self.n_actions:
            raise ConfigurationError(f"action {action} out of range")
        sv = encode_state(self.encoding, state, self.n_states)
        av = -np.ones(self.n_actions)
        av[action] = 1.0
        return np.concatenate([sv, av])

    def hidden_couplings(self) -> np.ndarray:
        """Dense symmetric (n_hidden, n_hidden) coupling matrix."""
        h = self.n_hidden
        j = np.zeros((h, h))
        offs = self.layer_offsets
        for k, block in enumerate(self.theta_hh):
            a0, a1 = offs[k], offs[k + 1]
            b0, b1 = offs[k + 1], offs[k + 2]
            j[a0:a1, b0:b1] = block
            j[b0:b1, a0:a1] = block.T
        return j


@dataclass
class ClampedIsing:
    """Classical Ising problem over the hidden spins for fixed visibles."""

    fields: np.ndarray  # (n_hidden,), nonzero only on the first layer
    couplings: np.ndarray  # (n_hidden, n_hidden), symmetric, zero diagonal

    @property
    def n_spins(self) -> int:
        return len(self.fields)

    def energies(self, configs: np.ndarray) -> np.ndarray:
        """E(s) = -h.s - 1/2 s J s for each row of configs."""
        configs = np.atleast_2d(configs).astype(np.float64)
        lin = configs @ self.fields
        quad = 0.5 * np.einsum("ri,ij,rj->r", configs, self.couplings, configs)
        return -(lin + quad)


@dataclass
class ReplicaIsing:
    """Suzuki-Trotter image of a clamped transverse-field model.

    Spin (hidden h, replica k) has flat index k * n_hidden + h.  Intra-replica
    fields and couplings are the clamped ones divided by r; each hidden node
    carries a periodic ferromagnetic chain of strength w_plus across replicas.
    """

    r: int
    n_hidden: int
    fields: np.ndarray  # (n_hidden * r,)
    couplings_intra: np.ndarray  # block-diagonal, (n, n)
    couplings_chain: np.ndarray  # chain-only couplings, (n, n)
    chain_strength: float

    @property
    def n_spins(self) -> int:
        return self.n_hidden * self.r

    def couplings_full(self) -> np.ndarray:
        return self.couplings_intra + self.couplings_chain

    def effective_energies(self, configs: np.ndarray) -> np.ndarray:
        """Replica-averaged clamped energy, excluding the chain term."""
        configs = np.atleast_2d(configs).astype(np.float64)
        lin = configs @ self.fields
        quad = 0.5 * np.einsum("ri,ij,rj->r", configs, self.couplings_intra, configs)
        return -(lin + quad)

    def full_energies(self, configs: np.ndarray) -> np.ndarray:
        configs = np.atleast_2d(configs).astype(np.float64)
        lin = configs @ self.fields
        quad = 0.5 * np.einsum("ri,ij,rj->r", configs, self.couplings_full(), configs)
        return -(lin + quad)


@dataclass
class SaSchedule:
    sweeps: int = 50
    reads: int = 1000
    beta_start: float = 0.1
    beta_end: float = 2.0

    def __post_init__(self):
        if self.reads < 1 or self.sweeps < 1:
            raise ConfigurationError("reads and sweeps must be >= 1")
        if not 0 < self.beta_start <= self.beta_end:
            raise ConfigurationError("need 0 < beta_start <= beta_end")


@dataclass
class FreeEnergyEstimate:
    free_energy: float
    mean_energy: float
    entropy_term: float  # sum_c P(c) ln P(c), always <= 0
    magnetizations: np.ndarray  # (n_hidden,), replica-averaged
    correlations: np.ndarray  # (n_hidden, n_hidden), symmetric


def clamp(model: QbmModel, state: int, action: int) -> ClampedIsing:
    """Fix the visible nodes; visibles act as linear fields on the first layer."""
    v = model.visible_vector(state, action)
    fields = np.zeros(model.n_hidden)
    fields[: model.hidden_layers[0]] = v @ model.theta_vh
    return ClampedIsing(fields=fields, couplings=model.hidden_couplings())


def w_plus(big_gamma: float, beta: float, r: int) -> float:
    """Inter-replica chain coupling (1 / 2 beta) ln coth(Gamma beta / r)."""
    if r < 1:
        raise ConfigurationError("replica count must be >= 1")
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    if big_gamma <= 0:
        raise ConfigurationError(
            "chain coupling diverges at zero transverse field; use the classical path"
        )
    x = big_gamma * beta / r
    return (1.0 / (2.0 * beta)) * math.log(1.0 / math.tanh(x))


def replica_transform(
    clamped: ClampedIsing, r: int, big_gamma: float, beta: float
) -> ReplicaIsing:
    """Stack r coupled copies of the clamped problem.

    For r == 1 the chain term is a constant and is dropped; the result is the
    classical problem itself.
    """
    if r < 1:
        raise ConfigurationError("replica count must be >= 1")
    h = clamped.n_spins
    n = h * r
    fields = np.tile(clamped.fields / r, r)
    intra = np.zeros((n, n))
    for k in range(r):
        intra[k * h : (k + 1) * h, k * h : (k + 1) * h] = clamped.couplings / r
    chain = np.zeros((n, n))
    strength = 0.0
    if r >= 2:
        strength = w_plus(big_gamma, beta, r)
        for k in range(r):
            k2 = (k + 1) % r
            for hh in range(h):
                i, j = k * h + hh, k2 * h + hh
                chain[i, j] += strength
                chain[j, i] += strength
    return ReplicaIsing(
        r=r,
        n_hidden=h,
        fields=fields,
        couplings_intra=intra,
        couplings_chain=chain,
        chain_strength=strength,
    )


def sa_sample(
    ising: ReplicaIsing | ClampedIsing,
    schedule: SaSchedule,
    rng: np.random.Generator,
    ledger: Optional[CostLedger] = None,
    anneal_time_ns: float = DEFAULT_ANNEAL_TIME_NS,
) -> np.ndarray:
    """Metropolis single-spin-flip annealing; one configuration per read.

    All reads start from independent random configurations and are swept in
    parallel under a linear inverse-temperature ramp.  Returns int8 spins of
    shape (reads, n_spins).  Charges one anneal job to the ledger.
    """
    if isinstance(ising, ReplicaIsing):
        j = ising.couplings_full()
        fields = ising.fields
    else:
        j = ising.couplings
        fields = ising.fields
    n = len(fields)
    reads = schedule.reads
    spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(reads, n))
    betas = np.linspace(schedule.beta_start, schedule.beta_end, schedule.sweeps)
    spins_f = spins.astype(np.float64)
    for beta_t in betas:
        for i in range(n):
            local = spins_f @ j[i] + fields[i]
            d_e = 2.0 * spins_f[:, i] * local
            accept = rng.random(reads) < np.exp(np.minimum(0.0, -beta_t * d_e))
            spins_f[accept, i] *= -1.0
    if ledger is not None:
        ledger.charge_anneal(anneal_time_ns)
    return spins_f.astype(np.int8)


def estimate_free_energy(
    samples: np.ndarray, ising: ReplicaIsing | ClampedIsing, beta: float
) -> FreeEnergyEstimate:
    """Plug-in estimate F = <E> + (1/beta) sum_c P(c) ln P(c) from samples.

    <E> is the replica-averaged clamped energy (the chain term is a Trotter
    artifact and excluded); the entropy term uses empirical frequencies of
    distinct sampled configurations.
    """
    samples = np.atleast_2d(samples)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    if isinstance(ising, ClampedIsing):
        ising = ReplicaIsing(
            r=1,
            n_hidden=ising.n_spins,
            fields=ising.fields,
            couplings_intra=ising.couplings,
            couplings_chain=np.zeros_like(ising.couplings),
            chain_strength=0.0,
        )
    n_reads = samples.shape[0]
    distinct, counts = np.unique(samples, axis=0, return_counts=True)
    p = counts / n_reads
    energies = ising.effective_energies(distinct)
    mean_energy = float(p @ energies)
    entropy_term = float(np.sum(p * np.log(p)))
    free_energy = mean_energy + entropy_term / beta
    stacked = samples.reshape(n_reads, ising.r, ising.n_hidden).astype(np.float64)
    mags = stacked.mean(axis=(0, 1))
    corr = np.einsum("rkh,rkg->hg", stacked, stacked) / (n_reads * ising.r)
    return FreeEnergyEstimate(
        free_energy=free_energy,
        mean_energy=mean_energy,
        entropy_term=entropy_term,
        magnetizations=mags,
        correlations=corr,
    )


def _enumerate_configs(n: int) -> np.ndarray:
    basis = np.arange(2**n, dtype=np.int64)
    bits = (basis[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return 2.0 * bits - 1.0


def _classical_gibbs(clamped: ClampedIsing, beta: float):
    if clamped.n_spins > MAX_ENUM_HIDDEN:
        raise ConfigurationError(
            f"classical enumeration capped at {MAX_ENUM_HIDDEN} hidden nodes"
        )
    configs = _enumerate_configs(clamped.n_spins)
    energies = clamped.energies(configs)
    log_w = -beta * energies
    log_z = float(np.logaddexp.reduce(log_w))
    probs = np.exp(log_w - log_z)
    return configs, energies, probs, log_z


def _quantum_spectrum(clamped: ClampedIsing, big_gamma: float):
    h = clamped.n_spins
    if h > MAX_DIAG_HIDDEN:
        raise ConfigurationError(
            f"dense diagonalization capped at {MAX_DIAG_HIDDEN} hidden nodes"
        )
    dim = 2**h
    configs = _enumerate_configs(h)
    ham = np.diag(clamped.energies(configs))
    # transverse field: -Gamma sigma_x on each hidden spin (bit flips)
    basis = np.arange(dim)
    for spin in range(h):
        flipped = basis ^ (1 << (h - 1 - spin))
        ham[basis, flipped] += -big_gamma
    eigvals, eigvecs = np.linalg.eigh(ham)
    return configs, eigvals, eigvecs


def exact_free_energy(
    model: QbmModel, state: int, action: int, mode: str = "auto"
) -> float:
    """Oracle free energy: -(1/beta) ln tr(exp(-beta H_v)).

    ``classical`` enumerates the zero-field Hamiltonian; ``quantum``
    diagonalizes the transverse-field Hamiltonian; ``auto`` picks by Gamma.
    """
    if mode == "auto":
        mode = "quantum" if model.big_gamma > 0 else "classical"
    clamped = clamp(model, state, action)
    if mode == "classical":
        _, _, _, log_z = _classical_gibbs(clamped, model.beta)
        return -log_z / model.beta
    if mode == "quantum":
        _, eigvals, _ = _quantum_spectrum(clamped, model.big_gamma)
        log_z = float(np.logaddexp.reduce(-model.beta * eigvals))
        return -log_z / model.beta
    raise ConfigurationError(f"unknown mode {mode!r}")


def exact_observables(
    model: QbmModel, state: int, action: int, mode: str = "auto"
) -> tuple[float, np.ndarray, np.ndarray]:
    """(F, <sigma_h^z>, <sigma_h^z sigma_h'^z>) under the exact Gibbs state."""
    if mode == "auto":
        mode = "quantum" if model.big_gamma > 0 else "classical"
    clamped = clamp(model, state, action)
    if mode == "classical":
        configs, _, probs, log_z = _classical_gibbs(clamped, model.beta)
        f = -log_z / model.beta
    elif mode == "quantum":
        configs, eigvals, eigvecs = _quantum_spectrum(clamped, model.big_gamma)
        log_w = -model.beta * eigvals
        log_z = float(np.logaddexp.reduce(log_w))
        weights = np.exp(log_w - log_z)
        # z-observables are diagonal, so only diag(rho) is needed
        probs = (np.abs(eigvecs) ** 2) @ weights
        f = -log_z / model.beta
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    mags = probs @ configs
    corr = np.einsum("c,ch,cg->hg", probs, configs, configs)
    return f, mags, corr


def fe_q_value(
    model: QbmModel,
    state: int,
    action: int,
    *,
    estimator: str = "exact",
    replicas: int = 1,
    schedule: Optional[SaSchedule] = None,
    rng: Optional[np.random.Generator] = None,
    ledger: Optional[CostLedger] = None,
    anneal_time_ns: float = DEFAULT_ANNEAL_TIME_NS,
) -> tuple[float, FreeEnergyEstimate]:
    """Q(s, a) = -F(s, a) plus the Gibbs observables used for the TD update."""
    if estimator == "exact":
        f, mags, corr = exact_observables(model, state, action)
        est = FreeEnergyEstimate(
            free_energy=f,
            mean_energy=float("nan"),
            entropy_term=float("nan"),
            magnetizations=mags,
            correlations=corr,
        )
        return -f, est
    if estimator == "sa":
        if rng is None:
            raise ConfigurationError("sa estimator requires an rng")
        schedule = schedule or SaSchedule()
        clamped = clamp(model, state, action)
        if model.big_gamma > 0 and replicas >= 2:
            problem: ReplicaIsing | ClampedIsing = replica_transform(
                clamped, replicas, model.big_gamma, model.beta
            )
        else:
            problem = clamped
        samples = sa_sample(
            problem, schedule, rng, ledger=ledger, anneal_time_ns=anneal_time_ns
        )
        est = estimate_free_energy(samples, problem, model.beta)
        return -est.free_energy, est
    raise ConfigurationError(f"unknown estimator {estimator!r}")


def fe_td_update(
    model: QbmModel,
    transition: Transition,
    f_now: float,
    f_next: float,
    magnetizations: np.ndarray,
    correlations: np.ndarray,
    alpha: float,
    gamma: float,
) -> QbmModel:
    """SARSA-style free-energy TD update of the weights, in place.

    delta = R - gamma * F(s', a') + F(s, a); for terminal transitions the
    bootstrap term is dropped (delta = R + F(s, a)).  Observables must come
    from the same clamped evaluation that produced f_now.
    """
    if transition.done:
        delta = transition.reward + f_now
    else:
        delta = transition.reward - gamma * f_next + f_now
    v = model.visible_vector(transition.state, transition.action)
    first = model.hidden_layers[0]
    model.theta_vh += alpha * delta * np.outer(v, magnetizations[:first])
    offs = model.layer_offsets
    for k in range(len(model.theta_hh)):
        a0, a1 = offs[k], offs[k + 1]
        b0, b1 = offs[k + 1], offs[k + 2]
        model.theta_hh[k] += alpha * delta * correlations[a0:a1, b0:b1]
    return model


class FeAgent:
    """Epsilon-greedy free-energy Q-learning agent (SARSA-style bootstrap)."""

    def __init__(
        self,
        model: QbmModel,
        *,
        estimator: str = "sa",
        replicas: int = 5,
        schedule: Optional[SaSchedule] = None,
        alpha: float = 0.01,
        lr_decay: float = 0.999,
        gamma: float = 0.95,
        anneal_time_ns: float = DEFAULT_ANNEAL_TIME_NS,
    ):
        self.model = model
        self.estimator = estimator
        self.replicas = replicas
        self.schedule = schedule or SaSchedule()
        self.alpha = alpha
        self.lr_decay = lr_decay
        self.gamma = gamma
        self.anneal_time_ns = anneal_time_ns
        self._pending: Optional[tuple[Transition, float, np.ndarray, np.ndarray]] = None

    def _evaluate(self, state: int, action: int, rng, ledger):
        return fe_q_value(
            self.model,
            state,
            action,
            estimator=self.estimator,
            replicas=self.replicas,
            schedule=self.schedule,
            rng=rng,
            ledger=ledger,
            anneal_time_ns=self.anneal_time_ns,
        )

    def select_action(
        self,
        state: int,
        eps: float,
        rng: np.random.Generator,
        ledger: Optional[CostLedger] = None,
    ) -> tuple[int, float, FreeEnergyEstimate]:
        """Choose an action and return its (Q, observables) evaluation."""
        if rng.random() < eps:
            action = int(rng.integers(self.model.n_actions))
            q, est = self._evaluate(state, action, rng, ledger)
            return action, q, est
        best = None
        for a in range(self.model.n_actions):
            q, est = self._evaluate(state, a, rng, ledger)
            if best is None or q > best[1]:
                best = (a, q, est)
        return best

    def step(
        self,
        state: int,
        eps: float,
        rng: np.random.Generator,
        ledger: Optional[CostLedger] = None,
    ) -> int:
        """Select an action; settle the pending TD update with its F value."""
        action, q, est = self.select_action(state, eps, rng, ledger)
        f_now = -q
        if self._pending is not None:
            tr, prev_f, prev_mags, prev_corr = self._pending
            fe_td_update(
                self.model, tr, prev_f, f_now, prev_mags, prev_corr, self.alpha, self.gamma
            )
            self.alpha *= self.lr_decay
            self._pending = None
        self._last_eval = (f_now, est.magnetizations, est.correlations)
        return action

    def observe(self, tr: Transition) -> None:
        f_now, mags, corr = self._last_eval
        if tr.done:
            fe_td_update(self.model, tr, f_now, 0.0, mags, corr, self.alpha, self.gamma)
            self.alpha *= self.lr_decay
            self._pending = None
        else:
            self._pending = (tr, f_now, mags, corr)
