"""Seeded experiment execution and metrics output.

One run = one config; each seed produces a CSV of per-episode metrics with a
fixed column order, and the run directory gets a summary.json with per-seed
scalars and an aggregate rolling-return curve.  All randomness flows from a
single numpy generator per seed, so metrics CSVs are byte-identical across
reruns of the same config + seed.  Wall-clock durations are kept out of the
CSVs (they are not reproducible) and reported only in the summary.
"""

from __future__ import annotations

import csv
import json
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..aa_agent import AaAgent
from ..ansatz import AnsatzSpec, ParamSet, count_qubits, feature_dim
from ..envs import GridworldEnv, load_layout, optimal_return
from ..fe_agents import FeAgent, QbmModel, SaSchedule
from ..pqc_agents import QdqnAgent, QpgAgent, linear_epsilon
from ..qsim import CostLedger
from .config import RunConfig

CSV_COLUMNS = (
    "env_step",
    "episode",
    "episode_return",
    "rolling_return",
    "circuit_executions",
    "modeled_clock_time_ns",
    "anneal_jobs",
    "qubit_count",
)

# fraction of the optimal return that counts as "solved" for sample efficiency
THRESHOLD_FRACTION = 0.9


@dataclass
class SeedResult:
    seed: int
    rows: list[tuple]
    final_rolling_return: float
    steps_to_threshold: int | None
    executions_at_threshold: int | None
    clock_at_threshold_ns: float | None
    total_executions: int
    total_clock_ns: float
    total_anneal_jobs: int
    qubit_count: int
    episodes: int
    wall_time_s: float


def _pqc_spec(cfg: RunConfig, env: GridworldEnv) -> AnsatzSpec:
    a = cfg.agent
    return AnsatzSpec(
        n_qubits=count_qubits(a["encoding"], env.n_states, env.n_actions),
        n_actions=env.n_actions,
        feature_dim=feature_dim(a["encoding"], env.n_states),
        n_layers=a["n_layers"],
        variant=a["ansatz_variant"],
        encoding=a["encoding"],
    )


def _qubit_count(cfg: RunConfig, env: GridworldEnv) -> int:
    if cfg.family in ("qpg", "qdqn"):
        return _pqc_spec(cfg, env).n_qubits
    if cfg.family == "aa":
        return 2 * env.n_states  # one 2-qubit register per state
    a = cfg.agent  # fe: annealer problem size = hidden spins times replicas
    return sum(a["hidden_layers"]) * a["replicas"]


def _run_seed_qpg(cfg: RunConfig, env: GridworldEnv, rng, ledger, on_episode):
    a = cfg.agent
    spec = _pqc_spec(cfg, env)
    agent = QpgAgent(
        spec,
        ParamSet.initial(spec, rng),
        env.n_states,
        gamma=a["gamma"],
        lr_params=a["lr_params"],
        lr_scaling=a["lr_scaling"],
        policy_mode=a["policy_mode"],
        timing=cfg.timing,
    )
    steps = 0
    while steps < cfg.max_env_steps:
        s = env.reset()
        episode = []
        total = 0.0
        while steps < cfg.max_env_steps:
            action = agent.select_action(s, rng, ledger)
            tr = env.step(action)
            episode.append(tr)
            total += tr.reward
            steps += 1
            if tr.done:
                break
            s = tr.next_state
        if episode and episode[-1].done:
            agent.update(episode, ledger)
            on_episode(steps, total)


def _run_seed_qdqn(cfg: RunConfig, env: GridworldEnv, rng, ledger, on_episode):
    a = cfg.agent
    spec = _pqc_spec(cfg, env)
    agent = QdqnAgent(
        spec,
        ParamSet.initial(spec, rng),
        env.n_states,
        gamma=a["gamma"],
        lr_params=a["lr_params"],
        lr_scaling=a["lr_scaling"],
        buffer_capacity=a["buffer_capacity"],
        batch_size=a["batch_size"],
        target_update_interval=a["target_update_interval"],
        timing=cfg.timing,
    )
    steps = 0
    while steps < cfg.max_env_steps:
        s = env.reset()
        total = 0.0
        done = False
        while not done and steps < cfg.max_env_steps:
            eps = linear_epsilon(steps, cfg.max_env_steps, a["eps_start"], a["eps_end"])
            action = agent.select_action_eps_greedy(s, eps, rng, ledger)
            tr = env.step(action)
            agent.push(tr)
            agent.learn(rng, ledger)
            total += tr.reward
            steps += 1
            done = tr.done
            s = tr.next_state
        if done:
            on_episode(steps, total)


def _run_seed_fe(cfg: RunConfig, env: GridworldEnv, rng, ledger, on_episode):
    a = cfg.agent
    model = QbmModel.initial(
        n_states=env.n_states,
        n_actions=env.n_actions,
        rng=rng,
        encoding=a["encoding"],
        hidden_layers=tuple(a["hidden_layers"]),
        big_gamma=a["big_gamma"],
        beta=a["beta"],
    )
    agent = FeAgent(
        model,
        estimator=a["estimator"],
        replicas=a["replicas"],
        schedule=SaSchedule(sweeps=a["sweeps"], reads=a["reads"], beta_end=a["beta"]),
        alpha=a["alpha"],
        lr_decay=a["lr_decay"],
        gamma=a["gamma"],
    )
    steps = 0
    while steps < cfg.max_env_steps:
        s = env.reset()
        total = 0.0
        done = False
        while not done and steps < cfg.max_env_steps:
            eps = linear_epsilon(steps, cfg.max_env_steps, a["eps_start"], a["eps_end"])
            action = agent.step(s, eps, rng, ledger)
            tr = env.step(action)
            agent.observe(tr)
            total += tr.reward
            steps += 1
            done = tr.done
            s = tr.next_state
        if done:
            on_episode(steps, total)


def _run_seed_aa(cfg: RunConfig, env: GridworldEnv, rng, ledger, on_episode):
    a = cfg.agent
    agent = AaAgent(
        env.n_states,
        env.n_actions,
        alpha=a["alpha"],
        gamma=a["gamma"],
        k=a["k"],
        timing=cfg.timing,
    )
    steps = 0
    while steps < cfg.max_env_steps:
        s = env.reset()
        total = 0.0
        done = False
        while not done and steps < cfg.max_env_steps:
            action = agent.select_action(s, rng, ledger)
            tr = env.step(action)
            agent.observe(tr)
            total += tr.reward
            steps += 1
            done = tr.done
            s = tr.next_state
        if done:
            on_episode(steps, total)


_RUNNERS = {
    "qpg": _run_seed_qpg,
    "qdqn": _run_seed_qdqn,
    "fe": _run_seed_fe,
    "aa": _run_seed_aa,
}


def run_seed(cfg: RunConfig, seed: int, threshold: float) -> SeedResult:
    env = GridworldEnv(load_layout(cfg.environment))
    rng = np.random.default_rng(seed)
    ledger = CostLedger()
    qubits = _qubit_count(cfg, env)
    window: deque[float] = deque(maxlen=cfg.rolling_window)
    rows: list[tuple] = []
    crossing: dict = {}

    def on_episode(env_step: int, episode_return: float) -> None:
        window.append(episode_return)
        rolling = sum(window) / len(window)
        rows.append(
            (
                env_step,
                len(rows) + 1,
                episode_return,
                rolling,
                ledger.circuit_executions,
                ledger.modeled_clock_time_ns,
                ledger.anneal_jobs,
                qubits,
            )
        )
        if not crossing and len(window) == cfg.rolling_window and rolling >= threshold:
            crossing["steps"] = env_step
            crossing["executions"] = ledger.circuit_executions
            crossing["clock_ns"] = ledger.modeled_clock_time_ns

    started = time.monotonic()
    _RUNNERS[cfg.family](cfg, env, rng, ledger, on_episode)
    wall = time.monotonic() - started
    final_rolling = rows[-1][3] if rows else float("-inf")
    return SeedResult(
        seed=seed,
        rows=rows,
        final_rolling_return=final_rolling,
        steps_to_threshold=crossing.get("steps"),
        executions_at_threshold=crossing.get("executions"),
        clock_at_threshold_ns=crossing.get("clock_ns"),
        total_executions=ledger.circuit_executions,
        total_clock_ns=ledger.modeled_clock_time_ns,
        total_anneal_jobs=ledger.anneal_jobs,
        qubit_count=qubits,
        episodes=len(rows),
        wall_time_s=wall,
    )


def _write_csv(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _mean_curve(results: list[SeedResult], budget: int, points: int = 200):
    """Rolling return sampled on a common env-step grid (step-function interp)."""
    grid = np.linspace(0, budget, points + 1)[1:]
    curves = []
    for res in results:
        if not res.rows:
            curves.append(np.full(len(grid), np.nan))
            continue
        xs = np.array([r[0] for r in res.rows], dtype=float)
        ys = np.array([r[3] for r in res.rows], dtype=float)
        idx = np.searchsorted(xs, grid, side="right") - 1
        vals = np.where(idx >= 0, ys[np.clip(idx, 0, None)], np.nan)
        curves.append(vals)
    stack = np.vstack(curves)
    valid = ~np.isnan(stack)
    counts = valid.sum(axis=0)
    mean = np.full(len(grid), np.nan)
    std = np.full(len(grid), np.nan)
    has = counts > 0
    filled = np.where(valid, stack, 0.0)
    mean[has] = filled.sum(axis=0)[has] / counts[has]
    dev = np.where(valid, stack - mean, 0.0)
    std[has] = np.sqrt((dev**2).sum(axis=0)[has] / counts[has])
    return grid, mean, std


def run_experiment(cfg: RunConfig) -> dict:
    """Run every seed, write per-seed CSVs plus summary.json; returns the summary."""
    layout = load_layout(cfg.environment)
    opt = optimal_return(layout)
    threshold = THRESHOLD_FRACTION * opt
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    results = [run_seed(cfg, seed, threshold) for seed in cfg.seeds]
    for res in results:
        _write_csv(out / f"metrics_seed{res.seed}.csv", res.rows)

    grid, mean, std = _mean_curve(results, cfg.max_env_steps)
    summary = {
        "name": cfg.name,
        "environment": cfg.environment,
        "family": cfg.family,
        "agent": cfg.agent,
        "seeds": list(cfg.seeds),
        "max_env_steps": cfg.max_env_steps,
        "rolling_window": cfg.rolling_window,
        "optimal_return": opt,
        "threshold_return": threshold,
        "per_seed": [
            {
                "seed": res.seed,
                "episodes": res.episodes,
                "final_rolling_return": res.final_rolling_return,
                "steps_to_threshold": res.steps_to_threshold,
                "executions_at_threshold": res.executions_at_threshold,
                "clock_at_threshold_ns": res.clock_at_threshold_ns,
                "total_circuit_executions": res.total_executions,
                "total_clock_ns": res.total_clock_ns,
                "total_anneal_jobs": res.total_anneal_jobs,
                "qubit_count": res.qubit_count,
                "wall_time_s": res.wall_time_s,
            }
            for res in results
        ],
        "aggregate": {
            "final_rolling_return_mean": float(
                np.mean([r.final_rolling_return for r in results])
            ),
            "final_rolling_return_std": float(
                np.std([r.final_rolling_return for r in results])
            ),
            "seeds_reaching_threshold": sum(
                1 for r in results if r.steps_to_threshold is not None
            ),
            "qubit_count": results[0].qubit_count,
            "curve_env_steps": grid.tolist(),
            "curve_rolling_return_mean": [None if np.isnan(v) else v for v in mean],
            "curve_rolling_return_std": [None if np.isnan(v) else v for v in std],
        },
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
