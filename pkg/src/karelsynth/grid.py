"""Karel gridworld state, actions, and perceptions.

The world is a rectangular grid of cells. Boundary cells are always walls,
interior cells may be walls, and every cell carries a non-negative marker
count. A single agent occupies one open cell and faces one of four
directions. All operations are pure: they return new states and never
mutate their inputs, so states can be shared freely across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
DIRECTIONS = ("north", "east", "south", "west")
# (row, col) offset per direction, row 0 at the top.
DIR_OFFSET = ((-1, 0), (0, 1), (1, 0), (0, -1))

MOVE, TURN_LEFT, TURN_RIGHT, PICK_MARKER, PUT_MARKER = 0, 1, 2, 3, 4
ACTIONS = ("move", "turnLeft", "turnRight", "pickMarker", "putMarker")

# Per-cell marker cap. Keeps marker counts byte-encodable; puts beyond the
# cap are flagged no-ops rather than errors.
MARKER_CAP = 10


@dataclass(frozen=True)
class GridState:
    """Full world state: walls, marker counts, and agent pose."""

    walls: np.ndarray  # bool, shape (height, width), read-only
    markers: np.ndarray  # uint8, shape (height, width), read-only
    agent_row: int
    agent_col: int
    agent_dir: int

    @property
    def height(self) -> int:
        return self.walls.shape[0]

    @property
    def width(self) -> int:
        return self.walls.shape[1]

    @property
    def agent_pos(self) -> tuple[int, int]:
        return (self.agent_row, self.agent_col)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridState):
            return NotImplemented
        return (
            self.agent_row == other.agent_row
            and self.agent_col == other.agent_col
            and self.agent_dir == other.agent_dir
            and np.array_equal(self.walls, other.walls)
            and np.array_equal(self.markers, other.markers)
        )

    def validate(self) -> None:
        """Raise ValueError if any state invariant is broken."""
        h, w = self.walls.shape
        if self.markers.shape != (h, w):
            raise ValueError("walls/markers shape mismatch")
        if not (self.walls[0, :].all() and self.walls[-1, :].all()
                and self.walls[:, 0].all() and self.walls[:, -1].all()):
            raise ValueError("grid boundary must be walls")
        if not (0 <= self.agent_row < h and 0 <= self.agent_col < w):
            raise ValueError("agent out of bounds")
        if self.walls[self.agent_row, self.agent_col]:
            raise ValueError("agent on a wall cell")
        if self.agent_dir not in (NORTH, EAST, SOUTH, WEST):
            raise ValueError("bad agent direction")
        if self.markers.max(initial=0) > MARKER_CAP or self.markers.min(initial=0) < 0:
            raise ValueError("marker count outside [0, cap]")


@dataclass(frozen=True)
class Perception:
    """The five boolean sensors available to programs."""

    front_is_clear: bool
    left_is_clear: bool
    right_is_clear: bool
    markers_present: bool

    @property
    def no_markers_present(self) -> bool:
        return not self.markers_present

    def as_tuple(self) -> tuple[bool, bool, bool, bool, bool]:
        return (
            self.front_is_clear,
            self.left_is_clear,
            self.right_is_clear,
            self.markers_present,
            self.no_markers_present,
        )


@dataclass(frozen=True)
class ActionResult:
    """Outcome of one action: the next state plus degenerate-action flags.

    Degenerate actions (blocked moves, picks from empty cells, puts at the
    marker cap) leave the state unchanged and set the matching flag, so
    execution is total and rollouts are always well defined.
    """

    state: GridState
    blocked: bool = False  # move into a wall
    empty_pick: bool = False  # pickMarker on a zero-count cell
    overflow: bool = False  # putMarker at the cap
    picked: bool = False  # marker count actually decremented
    put: bool = False  # marker count actually incremented


def _is_clear(state: GridState, direction: int) -> bool:
    dr, dc = DIR_OFFSET[direction]
    r, c = state.agent_row + dr, state.agent_col + dc
    if not (0 <= r < state.height and 0 <= c < state.width):
        return False
    return not state.walls[r, c]


def perceive(state: GridState) -> Perception:
    """Evaluate all five sensors relative to the agent's heading."""
    d = state.agent_dir
    return Perception(
        front_is_clear=_is_clear(state, d),
        left_is_clear=_is_clear(state, (d - 1) % 4),
        right_is_clear=_is_clear(state, (d + 1) % 4),
        markers_present=bool(state.markers[state.agent_row, state.agent_col] >= 1),
    )


def apply_action(state: GridState, action: int) -> ActionResult:
    """Apply one action and return the next state plus event flags.

    Total and deterministic for every valid state: invalid moves/picks/puts
    are flagged no-ops, never errors.
    """
    r, c, d = state.agent_row, state.agent_col, state.agent_dir
    if action == MOVE:
        dr, dc = DIR_OFFSET[d]
        nr, nc = r + dr, c + dc
        if 0 <= nr < state.height and 0 <= nc < state.width and not state.walls[nr, nc]:
            return ActionResult(GridState(state.walls, state.markers, nr, nc, d))
        return ActionResult(state, blocked=True)
    if action == TURN_LEFT:
        return ActionResult(GridState(state.walls, state.markers, r, c, (d - 1) % 4))
    if action == TURN_RIGHT:
        return ActionResult(GridState(state.walls, state.markers, r, c, (d + 1) % 4))
    if action == PICK_MARKER:
        if state.markers[r, c] > 0:
            markers = state.markers.copy()
            markers[r, c] -= 1
            return ActionResult(GridState(state.walls, markers, r, c, d), picked=True)
        return ActionResult(state, empty_pick=True)
    if action == PUT_MARKER:
        if state.markers[r, c] < MARKER_CAP:
            markers = state.markers.copy()
            markers[r, c] += 1
            return ActionResult(GridState(state.walls, markers, r, c, d), put=True)
        return ActionResult(state, overflow=True)
    raise ValueError(f"unknown action index {action}")


def empty_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Walls-on-the-boundary grid with no markers; returns (walls, markers)."""
    walls = np.zeros((height, width), dtype=bool)
    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True
    markers = np.zeros((height, width), dtype=np.uint8)
    return walls, markers


def make_state(
    height: int,
    width: int,
    agent: tuple[int, int],
    direction: int,
    wall_cells: Iterable[tuple[int, int]] = (),
    marker_cells: Iterable[tuple[int, int]] | dict[tuple[int, int], int] = (),
) -> GridState:
    """Convenience constructor used by tasks and tests."""
    walls, markers = empty_grid(height, width)
    for rc in wall_cells:
        walls[rc] = True
    if isinstance(marker_cells, dict):
        for rc, n in marker_cells.items():
            markers[rc] = n
    else:
        for rc in marker_cells:
            markers[rc] += 1
    state = GridState(walls, markers, agent[0], agent[1], direction)
    state.validate()
    return state


def random_world(
    rng: np.random.Generator,
    height: int = 8,
    width: int = 8,
    wall_density: float = 0.1,
    marker_density: float = 0.2,
) -> GridState:
    """Sample an enclosed random world with a random agent pose.

    Interior cells are walls with probability `wall_density`; open interior
    cells hold a single marker with probability `marker_density`. The agent
    is placed uniformly on an open cell with a uniform heading. Used for
    dataset rollouts and behavior-match evaluation states.
    """
    walls, markers = empty_grid(height, width)
    interior = walls[1:-1, 1:-1]
    interior[:] = rng.random(interior.shape) < wall_density
    open_cells = np.argwhere(~walls)
    if len(open_cells) == 0:
        # All-interior-walls draw; retry without walls (vanishingly rare).
        walls, markers = empty_grid(height, width)
        open_cells = np.argwhere(~walls)
    marker_mask = (rng.random(markers.shape) < marker_density) & ~walls
    markers[marker_mask] = 1
    r, c = open_cells[rng.integers(len(open_cells))]
    return GridState(walls, markers, int(r), int(c), int(rng.integers(4)))


def grid_to_text(state: GridState) -> str:
    """Render a state in the character-grid format (#, digit, ., A)."""
    rows = []
    for r in range(state.height):
        row = []
        for c in range(state.width):
            if (r, c) == state.agent_pos:
                row.append("A")
            elif state.walls[r, c]:
                row.append("#")
            elif state.markers[r, c] > 0:
                row.append(str(min(int(state.markers[r, c]), 9)))
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows)
