"""Structural interpreter for DSL programs over grid states.

Execution is total: it always terminates with a `Rollout`, either because
the program ran to completion or because one of two caps fired (the action
step cap, or a node-visit cap that bounds loops whose bodies never act).
Rollouts record everything downstream consumers need: the emitted actions,
the perception seen before each action, per-action AST node ids, branch
outcomes for coverage checks, and put/pick/blocked event flags for task
rewards.

The executor keeps its own mutable cursor over the grid for speed; its
semantics are those of `grid.apply_action`/`grid.perceive` exactly, which
the test suite checks against an independent reference interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import dsl
from .dsl import Action, If, IfElse, Program, Repeat, Stmt, While
from .grid import (DIR_OFFSET, MARKER_CAP, MOVE, PICK_MARKER, PUT_MARKER,
                   TURN_LEFT, TURN_RIGHT, GridState)

EXEC_CAP = 100  # max environment actions per rollout

# Per-action event flag bits.
FLAG_BLOCKED = 1
FLAG_EMPTY_PICK = 2
FLAG_OVERFLOW = 4
FLAG_PICKED = 8
FLAG_PUT = 16

TERMINATED_END = "program-end"
TERMINATED_CAP = "step-cap"


@dataclass
class Rollout:
    """Trace of one program execution from one initial state."""

    initial_state: GridState
    final_state: GridState
    actions: list[int]
    perceptions: list[tuple[bool, bool, bool, bool, bool]]  # seen before each action
    positions: list[tuple[int, int]]  # agent cell after each action
    flags: list[int]  # event bitmask per action
    node_ids: list[int]  # preorder AST statement id that emitted each action
    branch_events: frozenset[tuple[int, bool]]
    terminated: str  # TERMINATED_END or TERMINATED_CAP
    states: list[GridState] | None = None  # initial + after each action, if recorded

    def put_cells(self) -> list[tuple[int, int]]:
        return [p for p, f in zip(self.positions, self.flags) if f & FLAG_PUT]

    def picked_cells(self) -> list[tuple[int, int]]:
        return [p for p, f in zip(self.positions, self.flags) if f & FLAG_PICKED]

    def visited(self) -> set[tuple[int, int]]:
        cells = {(self.initial_state.agent_row, self.initial_state.agent_col)}
        cells.update(self.positions)
        return cells


# Node kinds for dispatch without isinstance chains.
_K_ACTION, _K_WHILE, _K_REPEAT, _K_IF, _K_IFELSE = range(5)
_KIND_OF = {Action: _K_ACTION, While: _K_WHILE, Repeat: _K_REPEAT,
            If: _K_IF, IfElse: _K_IFELSE}


@dataclass
class _Node:
    """Statement annotated with its preorder id; bodies hold child nodes."""

    nid: int
    kind: int
    stmt: Stmt
    children: tuple = ()
    else_children: tuple = ()


def annotate(program: Program) -> tuple[tuple[_Node, ...], int]:
    """Assign preorder ids to every statement; returns (roots, node_count)."""
    counter = 0

    def build(stmts: tuple[Stmt, ...]) -> tuple[_Node, ...]:
        nonlocal counter
        nodes = []
        for s in stmts:
            nid = counter
            counter += 1
            kind = _KIND_OF[type(s)]
            if kind == _K_ACTION:
                nodes.append(_Node(nid, kind, s))
            elif kind == _K_IFELSE:
                nodes.append(_Node(nid, kind, s, build(s.then_body), build(s.else_body)))
            else:
                nodes.append(_Node(nid, kind, s, build(s.body)))
        return tuple(nodes)

    roots = build(program.body)
    return roots, counter


class _Halt(Exception):
    """Internal: a cap fired, unwind to the rollout boundary."""


class _Executor:
    """Mutable execution cursor; one instance per rollout."""

    def __init__(self, init: GridState, exec_cap: int, node_cap: int,
                 record_states: bool):
        self.init = init
        # Python lists beat ndarray scalar indexing in the per-step loop.
        self.walls = init.walls.tolist()
        self.markers = init.markers.tolist()
        self.row = init.agent_row
        self.col = init.agent_col
        self.dir = init.agent_dir
        self.exec_cap = exec_cap
        self.node_cap = node_cap
        self.node_visits = 0
        self.actions: list[int] = []
        self.perceptions: list[tuple[bool, bool, bool, bool, bool]] = []
        self.positions: list[tuple[int, int]] = []
        self.flags: list[int] = []
        self.node_ids: list[int] = []
        self.branch_events: set[tuple[int, bool]] = set()
        self.states: list[GridState] | None = [init] if record_states else None

    def snapshot(self) -> GridState:
        markers = np.array(self.markers, dtype=np.uint8)
        return GridState(self.init.walls, markers, self.row, self.col, self.dir)

    def _clear(self, direction: int) -> bool:
        dr, dc = DIR_OFFSET[direction]
        return not self.walls[self.row + dr][self.col + dc]

    def percept_tuple(self) -> tuple[bool, bool, bool, bool, bool]:
        d = self.dir
        markers_present = self.markers[self.row][self.col] >= 1
        return (self._clear(d), self._clear((d - 1) % 4),
                self._clear((d + 1) % 4), markers_present,
                not markers_present)

    def test(self, cond: dsl.Cond) -> bool:
        value = self.percept_tuple()[cond.perception]
        return not value if cond.negated else value

    def emit(self, node: _Node) -> None:
        if len(self.actions) >= self.exec_cap:
            raise _Halt
        self.perceptions.append(self.percept_tuple())
        action = node.stmt.action
        bits = 0
        if action == MOVE:
            dr, dc = DIR_OFFSET[self.dir]
            nr, nc = self.row + dr, self.col + dc
            if self.walls[nr][nc]:
                bits = FLAG_BLOCKED
            else:
                self.row, self.col = nr, nc
        elif action == TURN_LEFT:
            self.dir = (self.dir - 1) % 4
        elif action == TURN_RIGHT:
            self.dir = (self.dir + 1) % 4
        elif action == PICK_MARKER:
            row = self.markers[self.row]
            if row[self.col] > 0:
                row[self.col] -= 1
                bits = FLAG_PICKED
            else:
                bits = FLAG_EMPTY_PICK
        elif action == PUT_MARKER:
            row = self.markers[self.row]
            if row[self.col] < MARKER_CAP:
                row[self.col] += 1
                bits = FLAG_PUT
            else:
                bits = FLAG_OVERFLOW
        self.actions.append(action)
        self.positions.append((self.row, self.col))
        self.node_ids.append(node.nid)
        self.flags.append(bits)
        if self.states is not None:
            self.states.append(self.snapshot())

    def run_body(self, nodes: tuple[_Node, ...]) -> None:
        for node in nodes:
            self.node_visits += 1
            if self.node_visits > self.node_cap:
                raise _Halt
            kind = node.kind
            if kind == _K_ACTION:
                self.emit(node)
            elif kind == _K_WHILE:
                # The condition is re-evaluated before every iteration.
                cond = node.stmt.cond
                while True:
                    self.node_visits += 1
                    if self.node_visits > self.node_cap:
                        raise _Halt
                    took = self.test(cond)
                    self.branch_events.add((node.nid, took))
                    if not took:
                        break
                    self.run_body(node.children)
            elif kind == _K_REPEAT:
                for _ in range(node.stmt.count):
                    self.run_body(node.children)
            elif kind == _K_IF:
                took = self.test(node.stmt.cond)
                self.branch_events.add((node.nid, took))
                if took:
                    self.run_body(node.children)
            else:  # ifelse
                took = self.test(node.stmt.cond)
                self.branch_events.add((node.nid, took))
                self.run_body(node.children if took else node.else_children)


def execute(
    program: Program,
    init: GridState,
    exec_cap: int = EXEC_CAP,
    node_cap: int | None = None,
    record_states: bool = False,
) -> Rollout:
    """Run a program from an initial state and return its rollout.

    `exec_cap` bounds emitted environment actions. `node_cap` bounds
    statement visits and loop-condition checks so that loops that never act
    still terminate; it defaults to a generous multiple of the action cap.
    if/ifelse evaluate their condition once at entry; while re-evaluates
    each iteration.
    """
    if node_cap is None:
        node_cap = max(10_000, 20 * exec_cap)
    roots, _ = annotate(program)
    ex = _Executor(init, exec_cap, node_cap, record_states)
    terminated = TERMINATED_END
    try:
        ex.run_body(roots)
    except _Halt:
        terminated = TERMINATED_CAP
    return Rollout(
        initial_state=init,
        final_state=ex.snapshot(),
        actions=ex.actions,
        perceptions=ex.perceptions,
        positions=ex.positions,
        flags=ex.flags,
        node_ids=ex.node_ids,
        branch_events=frozenset(ex.branch_events),
        terminated=terminated,
        states=ex.states,
    )


# --- behavior matching ------------------------------------------------------


def prefix_match_score(trace_a: Sequence[int], trace_b: Sequence[int]) -> float:
    """Fraction of the longer trace covered by the common action prefix.

    The per-step indicator is 1 while every action up to that step matches
    and stays 0 after the first mismatch, so the sum telescopes to the
    common prefix length over the max trace length. Two empty traces count
    as a perfect match so that self-comparison is always 1.
    """
    n = max(len(trace_a), len(trace_b))
    if n == 0:
        return 1.0
    m = 0
    for a, b in zip(trace_a, trace_b):
        if a != b:
            break
        m += 1
    return m / n


def behavior_match(
    candidate: Program,
    target: Program,
    init_states: Sequence[GridState],
    exec_cap: int = EXEC_CAP,
    target_traces: Sequence[Sequence[int]] | None = None,
) -> float:
    """Mean action-prefix match between two programs over initial states.

    Symmetric in its two programs, 1.0 for behaviorally identical programs
    (including syntactically different aliases), and always in [0, 1].
    Precomputed `target_traces` (aligned with `init_states`) avoid
    re-executing the target when it is fixed, e.g. during training.
    """
    if len(init_states) == 0:
        raise ValueError("behavior_match requires at least one initial state")
    if target_traces is None:
        target_traces = [execute(target, s, exec_cap).actions for s in init_states]
    total = 0.0
    for state, t_trace in zip(init_states, target_traces):
        c_trace = execute(candidate, state, exec_cap).actions
        total += prefix_match_score(c_trace, t_trace)
    return total / len(init_states)
