"""Declarative TOML run configurations.

A config names an environment (builtin id or layout file), an agent family
with its hyperparameters, the seed list, the step budget, and the timing
constants.  Relative output directories are resolved against the
QRLBENCH_OUTPUT_ROOT environment variable when it is set.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..ansatz import ENCODINGS, VARIANTS
from ..errors import ConfigurationError
from ..qsim import TimingModel

OUTPUT_ROOT_ENV = "QRLBENCH_OUTPUT_ROOT"

AGENT_FAMILIES = ("qpg", "qdqn", "fe", "aa")

DEFAULT_BUDGETS = {
    "gridworld_3x3": 20_000,
    "gridworld_3x5": 30_000,
    "frozen_lake_4x4": 50_000,
    "frozen_lake_8x8": 150_000,
}

_AGENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "qpg": {
        "encoding": "binary",
        "ansatz_variant": "full",
        "n_layers": 5,
        "gamma": 0.95,
        "lr_params": 0.025,
        "lr_scaling": 0.1,
        "policy_mode": "softmax",
    },
    "qdqn": {
        "encoding": "binary",
        "ansatz_variant": "full",
        "n_layers": 5,
        "gamma": 0.95,
        "lr_params": 0.01,
        "lr_scaling": 0.01,
        "buffer_capacity": 10_000,
        "batch_size": 16,
        "target_update_interval": 25,
        "eps_start": 1.0,
        "eps_end": 0.05,
    },
    "fe": {
        "hidden_layers": [4, 4],
        "big_gamma": 0.506,
        "beta": 2.0,
        "replicas": 5,
        "estimator": "sa",
        "sweeps": 50,
        "reads": 1000,
        "alpha": 0.01,
        "lr_decay": 0.999,
        "gamma": 0.95,
        "eps_start": 1.0,
        "eps_end": 0.05,
        "encoding": "one_hot",
    },
    "aa": {
        "k": 1.5,
        "alpha": 0.1,
        "gamma": 0.95,
    },
}


@dataclass(frozen=True)
class RunConfig:
    name: str
    environment: str  # builtin layout id or path to a layout file
    family: str
    seeds: tuple[int, ...]
    max_env_steps: int
    rolling_window: int
    agent: dict[str, Any]  # family-specific hyperparameters, fully defaulted
    timing: TimingModel
    output_dir: Path

    def __post_init__(self):
        if self.family not in AGENT_FAMILIES:
            raise ConfigurationError(
                f"unknown agent family {self.family!r}; expected one of {AGENT_FAMILIES}"
            )
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds must be distinct")
        if self.max_env_steps < 1:
            raise ConfigurationError("max_env_steps must be positive")
        if self.rolling_window < 1:
            raise ConfigurationError("rolling_window must be positive")


def _resolve_output(raw: str) -> Path:
    path = Path(raw)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def parse_config(data: dict[str, Any], *, base_dir: Path | None = None) -> RunConfig:
    if "experiment" not in data:
        raise ConfigurationError("missing [experiment] section")
    exp = data["experiment"]
    _check_keys(
        exp,
        {"name", "environment", "seeds", "max_env_steps", "rolling_window"},
        "experiment",
    )
    try:
        environment = exp["environment"]
    except KeyError:
        raise ConfigurationError("experiment.environment is required") from None
    agent_section = data.get("agent", {})
    family = agent_section.get("family")
    if family is None:
        raise ConfigurationError("agent.family is required")
    if family not in AGENT_FAMILIES:
        raise ConfigurationError(
            f"unknown agent family {family!r}; expected one of {AGENT_FAMILIES}"
        )
    defaults = _AGENT_DEFAULTS[family]
    overrides = agent_section.get(family, {})
    _check_keys(overrides, set(defaults), f"agent.{family}")
    agent = {**defaults, **overrides}
    _validate_agent(family, agent)

    seeds = exp.get("seeds", 10)
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    seeds = tuple(int(s) for s in seeds)

    budget = exp.get("max_env_steps", DEFAULT_BUDGETS.get(environment))
    if budget is None:
        raise ConfigurationError(
            f"max_env_steps is required for non-builtin environment {environment!r}"
        )

    timing_section = data.get("timing", {})
    _check_keys(timing_section, {"t_1q_ns", "t_2q_ns", "t_meas_ns", "shots"}, "timing")
    timing = TimingModel(**timing_section)

    output_section = data.get("output", {})
    _check_keys(output_section, {"dir"}, "output")
    name = exp.get("name", f"{family}_{Path(str(environment)).stem}")
    out_dir = _resolve_output(output_section.get("dir", f"runs/{name}"))

    env_path = Path(str(environment))
    if base_dir is not None and not env_path.is_absolute() and env_path.suffix:
        candidate = base_dir / env_path
        if candidate.exists():
            environment = str(candidate)

    known = {"experiment", "agent", "timing", "output"}
    _check_keys(data, known, "top level")

    return RunConfig(
        name=name,
        environment=str(environment),
        family=family,
        seeds=seeds,
        max_env_steps=int(budget),
        rolling_window=int(exp.get("rolling_window", 20)),
        agent=agent,
        timing=timing,
        output_dir=out_dir,
    )


def _validate_agent(family: str, agent: dict[str, Any]) -> None:
    if family in ("qpg", "qdqn"):
        if agent["encoding"] not in ENCODINGS:
            raise ConfigurationError(
                f"unknown encoding {agent['encoding']!r}; expected one of {ENCODINGS}"
            )
        if agent["ansatz_variant"] not in VARIANTS:
            raise ConfigurationError(
                f"unknown ansatz variant {agent['ansatz_variant']!r}; "
                f"expected one of {VARIANTS}"
            )
    if family == "fe":
        if agent["estimator"] not in ("sa", "exact"):
            raise ConfigurationError("fe estimator must be 'sa' or 'exact'")
        if agent["replicas"] < 1:
            raise ConfigurationError("fe replicas must be >= 1")
        if agent["encoding"] not in ENCODINGS:
            raise ConfigurationError(
                f"unknown encoding {agent['encoding']!r}; expected one of {ENCODINGS}"
            )
    if family == "aa" and agent["k"] < 0:
        raise ConfigurationError("aa gain k must be >= 0")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent)


def replace_config(cfg: RunConfig, **changes: Any) -> RunConfig:
    """dataclasses.replace wrapper that revalidates the result."""
    import dataclasses

    return dataclasses.replace(cfg, **changes)
