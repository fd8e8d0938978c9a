"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single PASS line on success; failures carry the measured
values in the assertion message.  Criteria 7a/7b/7c run real multi-seed
training and take minutes; everything else finishes in seconds.
"""

import math

import numpy as np

from qrlbench.aa_agent import AaAgent, grover_step, uniform_register
from qrlbench.ansatz import AnsatzSpec, ParamSet, build_circuit, count_qubits, feature_dim
from qrlbench.envs import GridworldEnv, load_layout
from qrlbench.fe_agents import (
    SaSchedule,
    estimate_free_energy,
    QbmModel,
    exact_free_energy,
    sa_sample,
    w_plus,
)
from qrlbench.harness import parse_config, run_experiment, run_sweep
from qrlbench.pqc_agents import QdqnAgent, QpgAgent, linear_epsilon
from qrlbench.qsim import (
    Circuit,
    CostLedger,
    Gate,
    ParamRef,
    TimingModel,
    estimate_circuit_time,
    parameter_shift_grad,
    parameter_shift_jacobian,
    run_circuit,
)

FD_EPS = 1e-6


def _random_circuit(rng, n_qubits, n_layers):
    gates = []
    params = {}
    obs = []
    for layer in range(n_layers):
        for q in range(n_qubits):
            kind = ("RX", "RY", "RZ")[rng.integers(3)]
            pid = f"p:{layer}:{q}"
            mult = float(rng.uniform(0.5, 2.0))
            params[pid] = float(rng.uniform(-np.pi, np.pi))
            gates.append(Gate(kind, (q,), ref=ParamRef(pid, mult)))
        if n_qubits >= 2:
            for q in range(n_qubits - 1):
                gates.append(Gate(("CZ", "CNOT")[rng.integers(2)], (q, q + 1)))
    for _ in range(2):
        n_obs = rng.integers(1, n_qubits + 1)
        qubits = tuple(sorted(rng.choice(n_qubits, size=n_obs, replace=False).tolist()))
        obs.append(qubits)
    return Circuit(n_qubits, tuple(gates), tuple(obs)), params


def test_criterion_1_gradient_oracle():
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(50):
        n_qubits = int(rng.integers(1, 6))
        n_layers = int(rng.integers(1, 4))
        circ, params = _random_circuit(rng, n_qubits, n_layers)
        weights = rng.normal(size=len(circ.observables))
        grads = parameter_shift_grad(
            circ, params, weights, ledger=CostLedger(), timing=TimingModel()
        )
        for pid, g in grads.items():
            up = dict(params)
            dn = dict(params)
            up[pid] += FD_EPS
            dn[pid] -= FD_EPS
            loss_up = float(weights @ run_circuit(circ, up))
            loss_dn = float(weights @ run_circuit(circ, dn))
            fd = (loss_up - loss_dn) / (2 * FD_EPS)
            worst = max(worst, abs(g - fd))
    assert worst < 1e-4, f"worst parameter-shift vs finite-difference gap {worst:.2e}"
    print(f"\nACCEPTANCE 1 (gradient oracle): PASS (max |shift - fd| = {worst:.2e})")


def test_criterion_2_grover_closed_form():
    worst = 0.0
    for L in range(7):
        reg = uniform_register(2)
        for _ in range(L):
            reg = grover_step(reg, 1)
        expected = math.sin((2 * L + 1) * math.pi / 6) ** 2
        worst = max(worst, abs(reg[1] ** 2 - expected))
    assert worst < 1e-9, f"worst closed-form gap {worst:.2e}"
    print(f"\nACCEPTANCE 2 (Grover closed form): PASS (max gap = {worst:.2e})")


def test_criterion_3_free_energy_oracle_equivalence():
    rng = np.random.default_rng(31)
    model = QbmModel.initial(
        n_states=2, n_actions=2, rng=rng, hidden_layers=(2, 2),
        big_gamma=0.0, beta=2.0, scale=0.3,
    )
    f_exact = exact_free_energy(model, 0, 0, mode="classical")
    from qrlbench.fe_agents import clamp

    clamped = clamp(model, 0, 0)
    schedule = SaSchedule(sweeps=50, reads=10_000, beta_end=model.beta)
    samples = sa_sample(clamped, schedule, np.random.default_rng(7))
    f_sa = estimate_free_energy(samples, clamped, model.beta).free_energy
    rel = abs(f_sa - f_exact) / abs(f_exact)
    assert rel < 0.02, f"SA F {f_sa:.5f} vs exact {f_exact:.5f} (rel {rel:.3%})"

    quantum_gap = abs(
        exact_free_energy(model, 0, 0, mode="quantum") - f_exact
    )
    assert quantum_gap < 1e-8, f"quantum vs classical oracle gap {quantum_gap:.2e}"
    print(
        f"\nACCEPTANCE 3 (free-energy oracles): PASS "
        f"(SA rel err {rel:.3%}, quantum gap {quantum_gap:.1e})"
    )


def test_criterion_4_chain_coupling_value():
    value = w_plus(0.506, 2.0, 5)
    assert abs(value - 0.4027) <= 1e-3, f"w_plus = {value:.5f}"
    print(f"\nACCEPTANCE 4 (chain coupling): PASS (w_plus = {value:.4f})")


def test_criterion_5_clock_time_exact():
    spec = AnsatzSpec(
        n_qubits=4, n_actions=4, feature_dim=4, n_layers=5,
        variant="full", encoding="binary",
    )
    circ = build_circuit(spec, np.ones(4))
    t = estimate_circuit_time(circ, TimingModel())
    assert t == 8.1e6, f"forward pass {t} ns, expected 8.1e6 ns exactly"
    print("\nACCEPTANCE 5 (clock arithmetic): PASS (8.1 ms exact)")


def test_criterion_6_execution_accounting():
    spec = AnsatzSpec(
        n_qubits=4, n_actions=4, feature_dim=4, n_layers=5,
        variant="full", encoding="binary",
    )
    circ = build_circuit(spec, np.ones(4))
    params = ParamSet.initial(spec, np.random.default_rng(0)).as_mapping()
    assert len(params) == 60, f"circuit has {len(params)} parameters, expected 60"
    ledger = CostLedger()
    parameter_shift_jacobian(circ, params, ledger=ledger, timing=TimingModel())
    assert ledger.circuit_executions == 120, (
        f"gradient used {ledger.circuit_executions} executions, expected 120"
    )
    print("\nACCEPTANCE 6 (execution accounting): PASS (120 executions for 60 params)")


def _train_rolling(env_name, make_agent, act, observe, budget, threshold, seed,
                   window=20, stop_at_cross=True):
    """Returns (first_crossing_step, clock_at_cross_ns, total_clock_ns)."""
    env = GridworldEnv(load_layout(env_name))
    rng = np.random.default_rng(seed)
    ledger = CostLedger()
    agent = make_agent(env, rng)
    returns = []
    steps = 0
    cross = None
    clock_at_cross = None
    while steps < budget:
        s = env.reset()
        total = 0.0
        episode = []
        done = False
        while not done and steps < budget:
            a = act(agent, s, rng, ledger, steps, budget)
            tr = env.step(a)
            episode.append(tr)
            total += tr.reward
            steps += 1
            done = tr.done
            s = tr.next_state
        if done:
            observe(agent, episode, rng, ledger)
            returns.append(total)
            if (
                cross is None
                and len(returns) >= window
                and float(np.mean(returns[-window:])) >= threshold
            ):
                cross = steps
                clock_at_cross = ledger.modeled_clock_time_ns
                if stop_at_cross:
                    return cross, clock_at_cross, ledger.modeled_clock_time_ns
    return cross, clock_at_cross, ledger.modeled_clock_time_ns


def test_criterion_7a_aa_gridworld():
    crossings = []
    for seed in range(10):
        env = GridworldEnv(load_layout("gridworld_3x3"))
        rng = np.random.default_rng(seed)
        ledger = CostLedger()
        agent = AaAgent(env.n_states, env.n_actions)
        returns = []
        steps = 0
        cross = None
        while steps < 20_000 and cross is None:
            s = env.reset()
            total = 0.0
            done = False
            while not done and steps < 20_000:
                a = agent.select_action(s, rng, ledger)
                tr = env.step(a)
                agent.observe(tr)
                total += tr.reward
                steps += 1
                done = tr.done
                s = tr.next_state
            if done:
                returns.append(total)
                if len(returns) >= 20 and float(np.mean(returns[-20:])) >= 0.6:
                    cross = steps
        crossings.append(cross)
    reached = sum(1 for c in crossings if c is not None)
    assert reached >= 8, f"AA reached 0.6 rolling in only {reached}/10 seeds: {crossings}"
    print(f"\nACCEPTANCE 7a (AA on 3x3): PASS ({reached}/10 seeds, crossings {crossings})")


def test_criterion_7b_qpg_frozen_lake():
    def make(env, rng):
        spec = AnsatzSpec(
            n_qubits=count_qubits("binary", env.n_states, env.n_actions),
            n_actions=env.n_actions,
            feature_dim=feature_dim("binary", env.n_states),
            n_layers=5, variant="full", encoding="binary",
        )
        return QpgAgent(
            spec, ParamSet.initial(spec, rng), env.n_states, policy_mode="softmax"
        )

    def act(agent, s, rng, ledger, steps, budget):
        return agent.select_action(s, rng, ledger)

    def observe(agent, episode, rng, ledger):
        agent.update(episode, ledger)

    crossings = []
    for seed in range(10):
        cross, _, _ = _train_rolling(
            "frozen_lake_4x4", make, act, observe, 50_000, 0.9, seed
        )
        crossings.append(cross)
    reached = sum(1 for c in crossings if c is not None)
    assert reached >= 7, f"QPG reached 0.9 rolling in only {reached}/10 seeds: {crossings}"
    print(f"\nACCEPTANCE 7b (QPG on frozen lake): PASS ({reached}/10, crossings {crossings})")


def test_criterion_7c_clock_time_ordering():
    threshold = 0.63  # 90% of the 3x3 optimum
    seeds = range(3)

    aa_clocks = []
    for seed in seeds:
        env = GridworldEnv(load_layout("gridworld_3x3"))
        rng = np.random.default_rng(seed)
        ledger = CostLedger()
        agent = AaAgent(env.n_states, env.n_actions)
        returns = []
        steps = 0
        clock = None
        while steps < 20_000 and clock is None:
            s = env.reset()
            total = 0.0
            done = False
            while not done and steps < 20_000:
                a = agent.select_action(s, rng, ledger)
                tr = env.step(a)
                agent.observe(tr)
                total += tr.reward
                steps += 1
                done = tr.done
                s = tr.next_state
            if done:
                returns.append(total)
                if len(returns) >= 20 and float(np.mean(returns[-20:])) >= threshold:
                    clock = ledger.modeled_clock_time_ns
        aa_clocks.append(clock if clock is not None else ledger.modeled_clock_time_ns)

    def qpg_make(env, rng):
        spec = AnsatzSpec(
            n_qubits=count_qubits("binary", env.n_states, env.n_actions),
            n_actions=env.n_actions,
            feature_dim=feature_dim("binary", env.n_states),
            n_layers=5, variant="full", encoding="binary",
        )
        return QpgAgent(
            spec, ParamSet.initial(spec, rng), env.n_states, policy_mode="softmax"
        )

    qpg_clocks = []
    for seed in seeds:
        cross, clock, total = _train_rolling(
            "gridworld_3x3",
            qpg_make,
            lambda agent, s, rng, ledger, steps, budget: agent.select_action(s, rng, ledger),
            lambda agent, episode, rng, ledger: agent.update(episode, ledger),
            20_000, threshold, seed,
        )
        # if a seed never crosses, its clock so far is a conservative lower bound
        qpg_clocks.append(clock if clock is not None else total)

    def qdqn_make(env, rng):
        spec = AnsatzSpec(
            n_qubits=count_qubits("binary", env.n_states, env.n_actions),
            n_actions=env.n_actions,
            feature_dim=feature_dim("binary", env.n_states),
            n_layers=5, variant="full", encoding="binary",
        )
        return QdqnAgent(spec, ParamSet.initial(spec, rng), env.n_states)

    def qdqn_act(agent, s, rng, ledger, steps, budget):
        eps = linear_epsilon(steps, budget)
        a = agent.select_action_eps_greedy(s, eps, rng, ledger)
        return a

    qdqn_clocks = []
    for seed in seeds:
        env = GridworldEnv(load_layout("gridworld_3x3"))
        rng = np.random.default_rng(seed)
        ledger = CostLedger()
        agent = qdqn_make(env, rng)
        returns = []
        steps = 0
        clock = None
        budget = 5_000  # crosses around step 2000; capped to keep runtime down
        while steps < budget and clock is None:
            s = env.reset()
            total = 0.0
            done = False
            while not done and steps < budget:
                a = qdqn_act(agent, s, rng, ledger, steps, budget)
                tr = env.step(a)
                agent.push(tr)
                agent.learn(rng, ledger)
                total += tr.reward
                steps += 1
                done = tr.done
                s = tr.next_state
            if done:
                returns.append(total)
                if len(returns) >= 20 and float(np.mean(returns[-20:])) >= threshold:
                    clock = ledger.modeled_clock_time_ns
        qdqn_clocks.append(clock if clock is not None else ledger.modeled_clock_time_ns)

    aa = max(aa_clocks)
    qpg = min(qpg_clocks)
    qdqn = min(qdqn_clocks)
    assert aa < qpg and aa < qdqn, (
        f"clock at threshold: AA {aa:.3e} ns, QPG {qpg:.3e} ns, QDQN {qdqn:.3e} ns"
    )
    print(
        f"\nACCEPTANCE 7c (clock ordering): PASS "
        f"(AA {aa:.2e} ns < QPG {qpg:.2e} ns, QDQN {qdqn:.2e} ns)"
    )


def test_criterion_8_ablation_sweeps(tmp_path):
    variant_cfg = parse_config(
        {
            "experiment": {
                "name": "accept_variants",
                "environment": "gridworld_3x3",
                "seeds": 2,
                "max_env_steps": 800,
            },
            "agent": {"family": "qpg"},
            "output": {"dir": str(tmp_path / "variants")},
        }
    )
    variants = run_sweep(variant_cfg, "ansatz_variant")
    assert [r["axis_value"] for r in variants["values"]] == [
        "full", "a_no_ent", "b_no_ent_full_encoding",
    ]

    # variant A must contain no two-qubit gates at all
    spec = AnsatzSpec(
        n_qubits=4, n_actions=4, feature_dim=4, n_layers=5,
        variant="a_no_ent", encoding="binary",
    )
    circ = build_circuit(spec, np.ones(4))
    two_qubit = sum(1 for g in circ.gates if len(g.targets) == 2)
    assert two_qubit == 0, f"variant A circuit has {two_qubit} two-qubit gates"

    replica_cfg = parse_config(
        {
            "experiment": {
                "name": "accept_replicas",
                "environment": "gridworld_3x3",
                "seeds": 1,
                "max_env_steps": 150,
            },
            "agent": {"family": "fe", "fe": {"reads": 200, "sweeps": 20}},
            "output": {"dir": str(tmp_path / "replicas")},
        }
    )
    replicas = run_sweep(replica_cfg, "replica_count", [1, 5, 10])
    assert [r["axis_value"] for r in replicas["values"]] == [1, 5, 10]
    for table in (variants, replicas):
        for row in table["values"]:
            for key in (
                "final_rolling_return_mean", "final_rolling_return_std",
                "seeds_reaching_threshold", "qubit_count",
                "total_circuit_executions", "total_clock_ns", "total_anneal_jobs",
            ):
                assert key in row, f"missing {key} in sweep table"
    assert [r["qubit_count"] for r in replicas["values"]] == [8, 40, 80]
    print("\nACCEPTANCE 8 (ablation sweeps): PASS (schema-valid variant and replica tables)")


def test_criterion_9_determinism(tmp_path):
    families = {
        "aa": {"family": "aa"},
        "qpg": {"family": "qpg"},
        "fe": {"family": "fe", "fe": {"reads": 32, "sweeps": 4, "replicas": 2}},
    }
    budgets = {"aa": 800, "qpg": 250, "fe": 40}
    for family, agent in families.items():
        digests = []
        for attempt in ("first", "second"):
            cfg = parse_config(
                {
                    "experiment": {
                        "name": f"det_{family}_{attempt}",
                        "environment": "gridworld_3x3",
                        "seeds": [0],
                        "max_env_steps": budgets[family],
                    },
                    "agent": agent,
                    "output": {"dir": str(tmp_path / f"{family}_{attempt}")},
                }
            )
            run_experiment(cfg)
            digests.append((cfg.output_dir / "metrics_seed0.csv").read_bytes())
        assert digests[0] == digests[1], f"{family} metrics differ between reruns"
    print("\nACCEPTANCE 9 (determinism): PASS (byte-identical CSVs for aa/qpg/fe)")
