"""Ablation sweeps: rerun one experiment while varying a single axis."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigurationError
from .config import RunConfig, replace_config
from .runner import run_experiment

# axis name -> (applicable families, agent key, default values)
SWEEP_AXES = {
    "ansatz_variant": (
        ("qpg", "qdqn"),
        "ansatz_variant",
        ["full", "a_no_ent", "b_no_ent_full_encoding"],
    ),
    "replica_count": (("fe",), "replicas", [1, 5, 10]),
    "encoding": (("qpg", "qdqn", "fe"), "encoding", ["binary", "one_hot"]),
}


def run_sweep(base: RunConfig, axis: str, values: list | None = None) -> dict:
    """One run_experiment per axis value; writes a comparison table."""
    if axis not in SWEEP_AXES:
        raise ConfigurationError(
            f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}"
        )
    families, key, defaults = SWEEP_AXES[axis]
    if base.family not in families:
        raise ConfigurationError(
            f"axis {axis!r} does not apply to agent family {base.family!r}"
        )
    values = defaults if values is None else values
    if not values:
        raise ConfigurationError("sweep needs at least one axis value")

    rows = []
    for value in values:
        agent = dict(base.agent)
        agent[key] = value
        sub = replace_config(
            base,
            name=f"{base.name}_{axis}_{value}",
            agent=agent,
            output_dir=base.output_dir / f"{axis}_{value}",
        )
        summary = run_experiment(sub)
        agg = summary["aggregate"]
        rows.append(
            {
                "axis_value": value,
                "name": sub.name,
                "final_rolling_return_mean": agg["final_rolling_return_mean"],
                "final_rolling_return_std": agg["final_rolling_return_std"],
                "seeds_reaching_threshold": agg["seeds_reaching_threshold"],
                "qubit_count": agg["qubit_count"],
                "total_circuit_executions": sum(
                    s["total_circuit_executions"] for s in summary["per_seed"]
                ),
                "total_clock_ns": sum(s["total_clock_ns"] for s in summary["per_seed"]),
                "total_anneal_jobs": sum(
                    s["total_anneal_jobs"] for s in summary["per_seed"]
                ),
            }
        )

    comparison = {"axis": axis, "base": base.name, "values": rows}
    base.output_dir.mkdir(parents=True, exist_ok=True)
    with open(base.output_dir / f"sweep_{axis}.json", "w") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return comparison
