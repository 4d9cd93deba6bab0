"""The six gridworld tasks: sampling and exact reward functions.

Each task couples a randomized (or fixed) initial-configuration sampler
with a reward evaluated on a finished rollout. Rewards are normalized to
[0, 1], or [-1, 1] for tasks with penalties. Marker-placement tasks carry a
spam guard: any marker placed somewhere it never belongs forces the reward
to exactly 0 regardless of everything else.

Grid size is a parameter everywhere so the same generators produce the
standard instances and enlarged ones (e.g. 100x100) for zero-shot
generalization runs.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .grid import EAST, WEST, GridState, empty_grid
from .interpreter import Rollout, execute
from .dsl import Program

KINDS = ("StairClimber", "FourCorner", "TopOff", "Maze", "CleanHouse", "Harvester")

STANDARD_DIMS = {
    "StairClimber": (12, 12),
    "FourCorner": (12, 12),
    "TopOff": (12, 12),
    "Maze": (8, 8),
    "CleanHouse": (14, 22),
    "Harvester": (8, 8),
}

STANDARD_HORIZON = 100

# Probability that each candidate bottom-row cell holds a marker in TopOff.
# The reference protocol only says the row is randomized; this is the
# declared default and is overridable per instance.
TOPOFF_MARKER_PROB = 0.5

CLEANHOUSE_GARBAGE = 10


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    height: int
    width: int
    horizon: int
    reward_range: tuple[float, float]


@dataclass(frozen=True)
class TaskInstance:
    """A concrete initial configuration plus the goal metadata its reward needs."""

    spec: TaskSpec
    initial: GridState
    rng_seed: int
    goal_cell: tuple[int, int] | None = None
    stair_cells: tuple[tuple[int, int], ...] = ()
    corners: tuple[tuple[int, int], ...] = ()
    marker_cells: tuple[tuple[int, int], ...] = ()  # TopOff bottom row / Harvester
    garbage_cells: tuple[tuple[int, int], ...] = ()
    dustbin_cell: tuple[int, int] | None = None
    total_markers: int = 0


def default_horizon(height: int, width: int, kind: str) -> int:
    if (height, width) == STANDARD_DIMS[kind]:
        return STANDARD_HORIZON
    # Enlarged grids need proportionally longer episodes; 4 actions per cell
    # comfortably covers wall-following worst cases.
    return max(STANDARD_HORIZON, 4 * height * width)


def derive_seed(base_seed: int, index: int) -> int:
    """Stable per-config seed stream shared by every evaluation protocol."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


# --- samplers ----------------------------------------------------------------


def _spec(kind: str, height: int | None, width: int | None, horizon: int | None,
          signed: bool = False) -> TaskSpec:
    h0, w0 = STANDARD_DIMS[kind]
    h = height if height is not None else h0
    w = width if width is not None else w0
    hor = horizon if horizon is not None else default_horizon(h, w, kind)
    return TaskSpec(kind, h, w, hor, (-1.0, 1.0) if signed else (0.0, 1.0))


def stair_surface(height: int, width: int) -> tuple[tuple[int, int], ...]:
    """Walkable staircase cells from the bottom-left up to the top-right."""
    r, c = height - 2, 1
    cells = [(r, c)]
    while True:
        if r - 1 >= 1:
            r -= 1
            cells.append((r, c))
        else:
            break
        if c + 1 <= width - 2:
            c += 1
            cells.append((r, c))
        else:
            break
    return tuple(cells)


def sample_stair_climber(seed: int, height: int | None = None, width: int | None = None,
                         horizon: int | None = None) -> TaskInstance:
    spec = _spec("StairClimber", height, width, horizon, signed=True)
    rng = np.random.default_rng(seed)
    surface = stair_surface(spec.height, spec.width)
    walls, markers = empty_grid(spec.height, spec.width)
    lowest = {}
    for r, c in surface:
        lowest[c] = max(lowest.get(c, 0), r)
    for c, r_max in lowest.items():
        walls[r_max + 1:spec.height - 1, c] = True
    # The agent starts on a tread (an even surface index) facing east so the
    # canonical climb step (up, then right) stays on the staircase.
    treads = [i for i in range(0, len(surface) - 1, 2)]
    agent_i = int(treads[rng.integers(len(treads))])
    goal_i = int(rng.integers(agent_i + 1, len(surface)))
    goal = surface[goal_i]
    markers[goal] = 1
    state = GridState(walls, markers, *surface[agent_i], EAST)
    return TaskInstance(spec, state, seed, goal_cell=goal, stair_cells=surface)


def sample_four_corner(seed: int, height: int | None = None, width: int | None = None,
                       horizon: int | None = None) -> TaskInstance:
    spec = _spec("FourCorner", height, width, horizon)
    h, w = spec.height, spec.width
    walls, markers = empty_grid(h, w)
    corners = ((1, 1), (1, w - 2), (h - 2, 1), (h - 2, w - 2))
    # Fixed start one cell in from the bottom-left corner, facing east.
    state = GridState(walls, markers, h - 2, 2, EAST)
    return TaskInstance(spec, state, seed, corners=corners)


def topoff_candidate_cells(height: int, width: int) -> tuple[tuple[int, int], ...]:
    # Every bottom-row cell except the rightmost, which stays empty so the
    # agent can finish there.
    return tuple((height - 2, c) for c in range(1, width - 2))


def sample_top_off(seed: int, height: int | None = None, width: int | None = None,
                   horizon: int | None = None, config: int | None = None,
                   marker_prob: float = TOPOFF_MARKER_PROB) -> TaskInstance:
    """TopOff instance; `config` is a bitmask over candidate cells (LSB leftmost)."""
    spec = _spec("TopOff", height, width, horizon)
    rng = np.random.default_rng(seed)
    candidates = topoff_candidate_cells(spec.height, spec.width)
    if config is None:
        chosen = [cell for cell in candidates if rng.random() < marker_prob]
    else:
        chosen = [cell for i, cell in enumerate(candidates) if (config >> i) & 1]
    walls, markers = empty_grid(spec.height, spec.width)
    for cell in chosen:
        markers[cell] = 1
    state = GridState(walls, markers, spec.height - 2, 1, EAST)
    return TaskInstance(spec, state, seed, marker_cells=tuple(chosen))


def sample_maze(seed: int, height: int | None = None, width: int | None = None,
                horizon: int | None = None) -> TaskInstance:
    """Perfect maze carved by randomized depth-first search over odd cells."""
    spec = _spec("Maze", height, width, horizon)
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    walls = np.ones((h, w), dtype=bool)
    rooms = [(r, c) for r in range(1, h - 1, 2) for c in range(1, w - 1, 2)]
    start = rooms[rng.integers(len(rooms))]
    walls[start] = False
    stack = [start]
    while stack:
        r, c = stack[-1]
        neighbors = []
        for dr, dc in ((-2, 0), (2, 0), (0, -2), (0, 2)):
            nr, nc = r + dr, c + dc
            if 1 <= nr <= h - 2 and 1 <= nc <= w - 2 and walls[nr, nc]:
                neighbors.append((nr, nc))
        if not neighbors:
            stack.pop()
            continue
        nr, nc = neighbors[rng.integers(len(neighbors))]
        walls[(r + nr) // 2, (c + nc) // 2] = False
        walls[nr, nc] = False
        stack.append((nr, nc))
    open_cells = [tuple(map(int, rc)) for rc in np.argwhere(~walls)]
    agent_i = int(rng.integers(len(open_cells)))
    goal_i = int(rng.integers(len(open_cells) - 1))
    if goal_i >= agent_i:
        goal_i += 1
    goal = open_cells[goal_i]
    markers = np.zeros((h, w), dtype=np.uint8)
    markers[goal] = 1
    state = GridState(walls, markers, *open_cells[agent_i], int(rng.integers(4)))
    return TaskInstance(spec, state, seed, goal_cell=goal)


def cleanhouse_layout(height: int, width: int) -> tuple[np.ndarray, tuple[int, int], tuple[int, int]]:
    """Apartment walls plus (agent_start, dustbin) for arbitrary dims.

    The walkable space is a single-width circuit around a central block, so
    a left-wall-following sweep visits every open cell and ends on the
    dustbin placed just behind the fixed start.
    """
    walls, _ = empty_grid(height, width)
    walls[2:height - 2, 2:width - 2] = True
    return walls, (1, width - 3), (1, width - 2)


def parse_layout(text: str) -> tuple[np.ndarray, np.ndarray, tuple[int, int] | None, tuple[int, int] | None]:
    """Parse a character grid (#, ., M, D, A) into walls/markers/agent/dustbin."""
    lines = [ln for ln in text.splitlines() if ln]
    h, w = len(lines), len(lines[0])
    if any(len(ln) != w for ln in lines):
        raise ValueError("ragged layout file")
    walls = np.zeros((h, w), dtype=bool)
    markers = np.zeros((h, w), dtype=np.uint8)
    agent = dustbin = None
    for r, line in enumerate(lines):
        for c, ch in enumerate(line):
            if ch == "#":
                walls[r, c] = True
            elif ch == "M":
                markers[r, c] = 1
            elif ch == "D":
                dustbin = (r, c)
                markers[r, c] = 2
            elif ch == "A":
                agent = (r, c)
            elif ch != ".":
                raise ValueError(f"bad layout character {ch!r} at {(r, c)}")
    return walls, markers, agent, dustbin


def _load_cleanhouse_file() -> tuple[np.ndarray, tuple[int, int], tuple[int, int]]:
    text = importlib.resources.files("karelsynth.data").joinpath("cleanhouse.txt").read_text()
    walls, _, agent, dustbin = parse_layout(text)
    assert agent is not None and dustbin is not None
    return walls, agent, dustbin


def sample_clean_house(seed: int, height: int | None = None, width: int | None = None,
                       horizon: int | None = None) -> TaskInstance:
    spec = _spec("CleanHouse", height, width, horizon)
    rng = np.random.default_rng(seed)
    if (spec.height, spec.width) == STANDARD_DIMS["CleanHouse"]:
        walls, agent, dustbin = _load_cleanhouse_file()
    else:
        walls, agent, dustbin = cleanhouse_layout(spec.height, spec.width)
    markers = np.zeros_like(walls, dtype=np.uint8)
    markers[dustbin] = 2
    wall_adjacent = []
    for r, c in map(tuple, np.argwhere(~walls)):
        if (r, c) in (agent, dustbin):
            continue
        if walls[r - 1, c] or walls[r + 1, c] or walls[r, c - 1] or walls[r, c + 1]:
            wall_adjacent.append((int(r), int(c)))
    picks = rng.choice(len(wall_adjacent), size=CLEANHOUSE_GARBAGE, replace=False)
    garbage = tuple(wall_adjacent[i] for i in sorted(picks))
    for cell in garbage:
        markers[cell] = 1
    # The committed layout walks west along the top corridor first.
    state = GridState(walls, markers, agent[0], agent[1], WEST)
    return TaskInstance(spec, state, seed, garbage_cells=garbage, dustbin_cell=dustbin)


def harvester_cells(height: int, width: int) -> tuple[tuple[int, int], ...]:
    return tuple((r, c) for r in range(1, height - 1) for c in range(1, width - 1))


def sample_harvester(seed: int, height: int | None = None, width: int | None = None,
                     horizon: int | None = None,
                     config: frozenset[tuple[int, int]] | None = None) -> TaskInstance:
    """Harvester instance; `config` optionally restricts which cells hold markers."""
    spec = _spec("Harvester", height, width, horizon)
    cells = harvester_cells(spec.height, spec.width)
    if config is not None:
        cells = tuple(c for c in cells if c in config)
    walls, markers = empty_grid(spec.height, spec.width)
    for cell in cells:
        markers[cell] = 1
    state = GridState(walls, markers, spec.height - 2, 1, EAST)
    return TaskInstance(spec, state, seed, marker_cells=cells, total_markers=len(cells))


_SAMPLERS: dict[str, Callable[..., TaskInstance]] = {
    "StairClimber": sample_stair_climber,
    "FourCorner": sample_four_corner,
    "TopOff": sample_top_off,
    "Maze": sample_maze,
    "CleanHouse": sample_clean_house,
    "Harvester": sample_harvester,
}


def sample_task(kind: str, seed: int, **kwargs) -> TaskInstance:
    """Sample a task instance; deterministic given (kind, seed, kwargs)."""
    if kind not in _SAMPLERS:
        raise ValueError(f"unknown task kind {kind!r}; expected one of {KINDS}")
    return _SAMPLERS[kind](seed, **kwargs)


# --- rewards -----------------------------------------------------------------


def _net_removed(initial: GridState, final: GridState,
                 cells: Iterable[tuple[int, int]]) -> int:
    total = 0
    for cell in cells:
        total += max(0, int(initial.markers[cell]) - int(final.markers[cell]))
    return total


def task_reward(instance: TaskInstance, rollout: Rollout) -> float:
    """Normalized task reward for a rollout produced on this instance."""
    if rollout.initial_state != instance.initial:
        raise ValueError("rollout was not produced from this instance's initial state")
    kind = instance.spec.kind
    h, w = instance.spec.height, instance.spec.width

    if kind == "StairClimber":
        stair = set(instance.stair_cells)
        if any(cell not in stair for cell in rollout.visited()):
            return -1.0
        return 1.0 if instance.goal_cell in rollout.visited() else 0.0

    if kind == "Maze":
        return 1.0 if instance.goal_cell in rollout.visited() else 0.0

    if kind == "FourCorner":
        corners = set(instance.corners)
        if any(cell not in corners for cell in rollout.put_cells()):
            return 0.0
        marked = sum(1 for cell in corners if rollout.final_state.markers[cell] >= 1)
        return marked / 4.0

    if kind == "TopOff":
        bottom = h - 2
        if any(r != bottom for r, _ in rollout.put_cells()):
            return 0.0
        initial_markers = set(instance.marker_cells)
        count = 0
        for c in range(1, w - 1):
            cell = (bottom, c)
            final = int(rollout.final_state.markers[cell])
            if cell in initial_markers:
                if final >= 2:
                    count += 1
                else:
                    break
            elif final > 0:
                break  # marker placed on an empty bottom-row cell
        bonus = 1 if rollout.final_state.agent_pos == (bottom, w - 2) else 0
        return (count + bonus) / (len(instance.marker_cells) + 1)

    if kind == "CleanHouse":
        picked = _net_removed(instance.initial, rollout.final_state, instance.garbage_cells)
        return picked / len(instance.garbage_cells)

    if kind == "Harvester":
        picked = _net_removed(instance.initial, rollout.final_state, instance.marker_cells)
        return picked / instance.total_markers if instance.total_markers else 0.0

    raise ValueError(f"unknown task kind {kind!r}")


def run_on_instance(program: Program, instance: TaskInstance,
                    record_states: bool = False) -> tuple[float, Rollout]:
    rollout = execute(program, instance.initial, exec_cap=instance.spec.horizon,
                      record_states=record_states)
    return task_reward(instance, rollout), rollout


def mean_task_return(sampler: Callable[[int], TaskInstance], program: Program,
                     n_configs: int = 10, base_seed: int = 0) -> float:
    """Mean reward over seeded instances; seeds derive from `base_seed`."""
    if n_configs < 1:
        raise ValueError("n_configs must be >= 1")
    total = 0.0
    for i in range(n_configs):
        instance = sampler(derive_seed(base_seed, i))
        reward, _ = run_on_instance(program, instance)
        total += reward
    return total / n_configs


def make_sampler(kind: str, **kwargs) -> Callable[[int], TaskInstance]:
    def sampler(seed: int) -> TaskInstance:
        return sample_task(kind, seed, **kwargs)

    return sampler
