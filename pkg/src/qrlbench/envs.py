"""Deterministic discrete gridworld MDPs.

States are flat indices row * cols + col; the four actions are
0: up, 1: down, 2: left, 3: right.  Moves into walls or off-grid leave the
agent in place.  The reward for a step is the step reward plus the bonus of
the cell entered (goal or penalty); episodes end on goal, hole, or when the
step limit is reached.

Layouts are plain-text files: a header of ``key = value`` lines, a ``---``
separator, then a whitespace-separated character grid using
S (start), F (free), W (wall), H (hole), P (penalty), and G or R (goal).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ConfigurationError, EpisodeDoneError, LayoutError

N_ACTIONS = 4
# (drow, dcol) per action: up, down, left, right
_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

_HEADER_KEYS = ("step_reward", "goal_reward", "penalty_reward", "max_episode_steps")

BUILTIN_LAYOUTS = {
    "gridworld_3x3": "gridworld_3x3.txt",
    "gridworld_3x5": "gridworld_3x5.txt",
    "frozen_lake_4x4": "frozen_lake_4x4.txt",
    "frozen_lake_8x8": "frozen_lake_8x8.txt",
}


@dataclass(frozen=True)
class GridworldSpec:
    rows: int
    cols: int
    start: int
    goals: frozenset[int]
    walls: frozenset[int] = frozenset()
    holes: frozenset[int] = frozenset()
    penalties: frozenset[int] = frozenset()
    step_reward: float = 0.0
    goal_reward: float = 1.0
    penalty_reward: float = 0.0
    max_episode_steps: int = 100

    def __post_init__(self):
        n = self.rows * self.cols
        all_cells = set(self.goals) | set(self.walls) | set(self.holes) | set(self.penalties)
        if any(c < 0 or c >= n for c in all_cells | {self.start}):
            raise ConfigurationError("cell index out of bounds")
        if not self.goals:
            raise ConfigurationError("at least one goal cell is required")
        if self.start in self.walls or self.start in self.holes:
            raise ConfigurationError("start cell must not be a wall or hole")
        for a, b in (
            (self.goals, self.walls),
            (self.goals, self.holes),
            (self.walls, self.holes),
        ):
            if set(a) & set(b):
                raise ConfigurationError("goal/wall/hole cell sets must be disjoint")
        if self.max_episode_steps < 1:
            raise ConfigurationError("max_episode_steps must be >= 1")

    @property
    def n_states(self) -> int:
        return self.rows * self.cols

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def next_state(self, state: int, action: int) -> int:
        """Deterministic transition ignoring episode bookkeeping."""
        r, c = divmod(state, self.cols)
        dr, dc = _MOVES[action]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < self.rows and 0 <= nc < self.cols):
            return state
        nxt = nr * self.cols + nc
        if nxt in self.walls:
            return state
        return nxt

    def cell_reward(self, cell: int) -> float:
        r = self.step_reward
        if cell in self.goals:
            r += self.goal_reward
        if cell in self.penalties:
            r += self.penalty_reward
        return r

    def is_terminal_cell(self, cell: int) -> bool:
        return cell in self.goals or cell in self.holes


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    done: bool


class GridworldEnv:
    """Episode state machine over a GridworldSpec."""

    def __init__(self, spec: GridworldSpec):
        self.spec = spec
        self._state = spec.start
        self._steps = 0
        self._done = False

    @property
    def n_states(self) -> int:
        return self.spec.n_states

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def reset(self) -> int:
        self._state = self.spec.start
        self._steps = 0
        self._done = False
        return self._state

    def step(self, action: int) -> Transition:
        if self._done:
            raise EpisodeDoneError("episode already terminal; call reset()")
        if not 0 <= action < N_ACTIONS:
            raise ConfigurationError(f"action {action} out of range")
        s = self._state
        nxt = self.spec.next_state(s, action)
        reward = self.spec.cell_reward(nxt)
        self._steps += 1
        done = self.spec.is_terminal_cell(nxt) or self._steps >= self.spec.max_episode_steps
        self._state = nxt
        self._done = done
        return Transition(s, action, reward, nxt, done)


def value_iteration(
    spec: GridworldSpec, gamma: float = 1.0, tol: float = 1e-12, max_iters: int = 100_000
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal state values and a greedy policy; terminal cells have value 0."""
    n = spec.n_states
    v = np.zeros(n)
    terminal = np.array([spec.is_terminal_cell(s) or s in spec.walls for s in range(n)])
    nxt = np.array([[spec.next_state(s, a) for a in range(N_ACTIONS)] for s in range(n)])
    rew = np.array([[spec.cell_reward(nxt[s, a]) for a in range(N_ACTIONS)] for s in range(n)])
    nxt_terminal = terminal[nxt]
    for _ in range(max_iters):
        q = rew + gamma * np.where(nxt_terminal, 0.0, v[nxt])
        v_new = np.where(terminal, 0.0, q.max(axis=1))
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta < tol:
            break
    else:
        raise ArithmeticError("value iteration did not converge")
    q = rew + gamma * np.where(nxt_terminal, 0.0, v[nxt])
    policy = q.argmax(axis=1)
    return v, policy


def optimal_return(spec: GridworldSpec, gamma: float = 1.0) -> float:
    """Undiscounted episode return of the value-iteration greedy policy."""
    if spec.start in spec.goals:
        return spec.goal_reward
    # A marginal discount breaks action ties toward shorter paths, which
    # matters when step rewards are zero (frozen lake) and gamma is 1.
    _, policy = value_iteration(spec, min(gamma, 1.0 - 1e-6))
    s = spec.start
    total = 0.0
    for _ in range(spec.max_episode_steps):
        nxt = spec.next_state(s, int(policy[s]))
        total += spec.cell_reward(nxt)
        if spec.is_terminal_cell(nxt):
            break
        s = nxt
    return total


def parse_layout(text: str) -> GridworldSpec:
    """Parse the layout file format documented in the module docstring."""
    header: dict[str, float] = {}
    lines = [ln.rstrip() for ln in text.splitlines()]
    try:
        sep = next(i for i, ln in enumerate(lines) if ln.strip() == "---")
    except StopIteration:
        raise LayoutError("missing '---' separator between header and grid") from None
    for ln in lines[:sep]:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise LayoutError(f"bad header line {ln!r}")
        key, _, value = ln.partition("=")
        key = key.strip()
        if key not in _HEADER_KEYS:
            raise LayoutError(f"unknown header key {key!r}")
        try:
            header[key] = float(value.strip())
        except ValueError:
            raise LayoutError(f"non-numeric header value in {ln!r}") from None
    grid_rows = [ln.split() for ln in lines[sep + 1 :] if ln.strip()]
    if not grid_rows:
        raise LayoutError("empty grid")
    cols = len(grid_rows[0])
    if any(len(r) != cols for r in grid_rows):
        raise LayoutError("ragged grid rows")
    rows = len(grid_rows)
    start = None
    goals, walls, holes, penalties = set(), set(), set(), set()
    for r, row in enumerate(grid_rows):
        for c, ch in enumerate(row):
            cell = r * cols + c
            if ch == "S":
                if start is not None:
                    raise LayoutError("multiple start cells")
                start = cell
            elif ch == "F":
                pass
            elif ch in ("G", "R"):
                goals.add(cell)
            elif ch == "W":
                walls.add(cell)
            elif ch == "H":
                holes.add(cell)
            elif ch == "P":
                penalties.add(cell)
            else:
                raise LayoutError(f"unknown grid character {ch!r}")
    if start is None:
        raise LayoutError("missing start cell 'S'")
    return GridworldSpec(
        rows=rows,
        cols=cols,
        start=start,
        goals=frozenset(goals),
        walls=frozenset(walls),
        holes=frozenset(holes),
        penalties=frozenset(penalties),
        step_reward=header.get("step_reward", 0.0),
        goal_reward=header.get("goal_reward", 1.0),
        penalty_reward=header.get("penalty_reward", 0.0),
        max_episode_steps=int(header.get("max_episode_steps", 100)),
    )


def format_layout(spec: GridworldSpec) -> str:
    """Inverse of parse_layout (up to comments and whitespace)."""
    lines = [
        f"step_reward = {spec.step_reward}",
        f"goal_reward = {spec.goal_reward}",
        f"penalty_reward = {spec.penalty_reward}",
        f"max_episode_steps = {spec.max_episode_steps}",
        "---",
    ]
    for r in range(spec.rows):
        row = []
        for c in range(spec.cols):
            cell = r * spec.cols + c
            if cell == spec.start:
                row.append("S")
            elif cell in spec.goals:
                row.append("G")
            elif cell in spec.walls:
                row.append("W")
            elif cell in spec.holes:
                row.append("H")
            elif cell in spec.penalties:
                row.append("P")
            else:
                row.append("F")
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def load_layout(source: str | Path) -> GridworldSpec:
    """Load a layout by builtin id or file path."""
    if isinstance(source, str) and source in BUILTIN_LAYOUTS:
        text = (
            resources.files("qrlbench") / "layouts" / BUILTIN_LAYOUTS[source]
        ).read_text()
        return parse_layout(text)
    path = Path(source)
    if not path.exists():
        raise ConfigurationError(
            f"unknown environment {source!r}: not a builtin id "
            f"({', '.join(sorted(BUILTIN_LAYOUTS))}) or a file"
        )
    return parse_layout(path.read_text())


def make_env(source: str | Path, max_episode_steps: Optional[int] = None) -> GridworldEnv:
    spec = load_layout(source)
    if max_episode_steps is not None:
        spec = GridworldSpec(
            rows=spec.rows,
            cols=spec.cols,
            start=spec.start,
            goals=spec.goals,
            walls=spec.walls,
            holes=spec.holes,
            penalties=spec.penalties,
            step_reward=spec.step_reward,
            goal_reward=spec.goal_reward,
            penalty_reward=spec.penalty_reward,
            max_episode_steps=max_episode_steps,
        )
    return GridworldEnv(spec)
