"""Plot-ready output from finished runs.

Scans a directory tree for summary.json files, then emits:
- report.csv: long-format rows (experiment, seed, x_axis, x, y) with one
  group per x-axis (env_steps, circuit_executions, clock_time_s) and
  y = rolling return,
- report.md: a comparison table sorted by final performance, and
- one PNG learning-curve figure per x-axis.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

X_AXES = ("env_steps", "circuit_executions", "clock_time_s")

# metrics CSV column -> report x-axis (clock converted from ns to seconds)
_X_SOURCES = {
    "env_steps": ("env_step", 1.0),
    "circuit_executions": ("circuit_executions", 1.0),
    "clock_time_s": ("modeled_clock_time_ns", 1e-9),
}


def find_summaries(root: Path) -> list[Path]:
    return sorted(root.rglob("summary.json"))


def _load_seed_rows(run_dir: Path, seed: int) -> list[dict]:
    path = run_dir / f"metrics_seed{seed}.csv"
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_report(root: str | Path, out_dir: str | Path | None = None) -> dict:
    root = Path(root)
    out = Path(out_dir) if out_dir is not None else root
    summaries = find_summaries(root)
    if not summaries:
        raise ValueError(f"no summary.json found under {root}")
    out.mkdir(parents=True, exist_ok=True)

    experiments = []
    long_rows = []
    for spath in summaries:
        with open(spath) as fh:
            summary = json.load(fh)
        experiments.append(summary)
        for per_seed in summary["per_seed"]:
            seed = per_seed["seed"]
            rows = _load_seed_rows(spath.parent, seed)
            for axis in X_AXES:
                col, scale = _X_SOURCES[axis]
                for row in rows:
                    long_rows.append(
                        (
                            summary["name"],
                            seed,
                            axis,
                            float(row[col]) * scale,
                            float(row["rolling_return"]),
                        )
                    )

    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("experiment", "seed", "x_axis", "x", "y"))
        writer.writerows(long_rows)

    experiments.sort(
        key=lambda s: s["aggregate"]["final_rolling_return_mean"], reverse=True
    )
    md_path = out / "report.md"
    with open(md_path, "w") as fh:
        fh.write("| experiment | final return (mean ± std) | optimal | "
                 "seeds at threshold | qubits | total executions | "
                 "total clock [s] | anneal jobs |\n")
        fh.write("|---|---|---|---|---|---|---|---|\n")
        for s in experiments:
            agg = s["aggregate"]
            execs = sum(p["total_circuit_executions"] for p in s["per_seed"])
            clock = sum(p["total_clock_ns"] for p in s["per_seed"]) * 1e-9
            jobs = sum(p["total_anneal_jobs"] for p in s["per_seed"])
            fh.write(
                f"| {s['name']} "
                f"| {agg['final_rolling_return_mean']:.3f} ± "
                f"{agg['final_rolling_return_std']:.3f} "
                f"| {s['optimal_return']:.3f} "
                f"| {agg['seeds_reaching_threshold']}/{len(s['per_seed'])} "
                f"| {agg['qubit_count']} | {execs} | {clock:.3f} | {jobs} |\n"
            )

    figures = {}
    for axis in X_AXES:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for s in experiments:
            name = s["name"]
            pts = sorted(
                (r[3], r[4]) for r in long_rows if r[0] == name and r[2] == axis
            )
            if not pts:
                continue
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            ax.plot(xs, ys, label=name, linewidth=0.8, alpha=0.9)
        ax.set_xlabel(axis.replace("_", " "))
        ax.set_ylabel("rolling return")
        ax.legend(fontsize=7)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        fig_path = out / f"curves_{axis}.png"
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        figures[axis] = str(fig_path)

    return {
        "csv": str(csv_path),
        "markdown": str(md_path),
        "figures": figures,
        "experiments": [s["name"] for s in experiments],
    }
