import numpy as np

from conftest import load_corpus, random_programs
from karelsynth import dsl
from karelsynth.dsl import parse
from karelsynth.grid import EAST, NORTH, make_state, random_world
from karelsynth.interpreter import (TERMINATED_CAP, TERMINATED_END,
                                    behavior_match, execute,
                                    prefix_match_score)
from reference_interp import reference_trace

MOVE, TURN_LEFT, TURN_RIGHT, PICK, PUT = range(5)


def open_corridor(length=8):
    return make_state(3, length, agent=(1, 1), direction=EAST)


def test_repeat_unrolls():
    rollout = execute(parse("DEF run m( REPEAT R=2 r( move r) m)"), open_corridor())
    assert rollout.actions == [MOVE, MOVE]
    assert rollout.terminated == TERMINATED_END


def test_program_aliasing_identical_traces():
    state = open_corridor()
    a = execute(parse("DEF run m( REPEAT R=2 r( move r) m)"), state)
    b = execute(parse("DEF run m( move move m)"), state)
    assert a.actions == b.actions


def test_while_reevaluates_condition():
    state = make_state(3, 6, agent=(1, 1), direction=EAST)  # 3 open cells ahead
    rollout = execute(parse("DEF run m( WHILE c( frontIsClear c) w( move w) m)"), state)
    assert rollout.actions == [MOVE, MOVE, MOVE]
    assert rollout.terminated == TERMINATED_END


def test_if_evaluates_once_at_entry():
    # Putting a marker changes markersPresent, but the branch was already chosen.
    state = make_state(4, 4, agent=(1, 1), direction=EAST)
    program = parse("DEF run m( IF c( noMarkersPresent c) i( putMarker putMarker i) m)")
    rollout = execute(program, state)
    assert rollout.actions == [PUT, PUT]


def test_step_cap_terminates_infinite_loop():
    state = make_state(4, 4, agent=(1, 1), direction=EAST)
    rollout = execute(parse(
        "DEF run m( WHILE c( noMarkersPresent c) w( turnLeft w) m)"), state, exec_cap=50)
    assert len(rollout.actions) == 50
    assert rollout.terminated == TERMINATED_CAP


def test_node_cap_terminates_actionless_loop():
    # markersPresent stays true, the if body never fires: no actions at all.
    state = make_state(4, 4, agent=(1, 1), direction=NORTH,
                       marker_cells={(1, 1): 1},
                       wall_cells=[(2, 1), (1, 2)])
    program = parse("DEF run m( WHILE c( markersPresent c) w("
                    " IF c( frontIsClear c) i( move i) w) m)")
    rollout = execute(program, state)
    assert rollout.actions == []
    assert rollout.terminated == TERMINATED_CAP


def test_branch_events_record_outcomes():
    state = make_state(3, 6, agent=(1, 1), direction=EAST)
    program = parse("DEF run m( WHILE c( frontIsClear c) w( move w)"
                    " IF c( markersPresent c) i( pickMarker i) m)")
    rollout = execute(program, state)
    # while (node 0) both entered and exited; if (node 2) evaluated false
    assert (0, True) in rollout.branch_events
    assert (0, False) in rollout.branch_events
    assert (2, False) in rollout.branch_events
    assert (2, True) not in rollout.branch_events


def test_node_ids_reference_emitting_statements():
    program = parse("DEF run m( turnLeft WHILE c( frontIsClear c) w( move w) m)")
    rollout = execute(program, open_corridor())
    assert rollout.node_ids[0] == 0  # turnLeft
    assert all(nid == 2 for nid in rollout.node_ids[1:])  # moves inside while


def test_execute_deterministic():
    program = load_corpus("solution_maze")
    state = random_world(np.random.default_rng(3))
    assert execute(program, state) == execute(program, state)


def test_event_flags_and_positions():
    state = make_state(4, 4, agent=(1, 1), direction=EAST,
                       marker_cells={(1, 2): 1})
    program = parse("DEF run m( move pickMarker putMarker m)")
    rollout = execute(program, state)
    assert rollout.positions == [(1, 2), (1, 2), (1, 2)]
    assert rollout.picked_cells() == [(1, 2)]
    assert rollout.put_cells() == [(1, 2)]


def test_recorded_states_match_actions():
    program = parse("DEF run m( move move turnLeft m)")
    rollout = execute(program, open_corridor(), record_states=True)
    assert len(rollout.states) == len(rollout.actions) + 1
    assert rollout.states[0] == rollout.initial_state
    assert rollout.states[-1] == rollout.final_state


# --- behavior match ----------------------------------------------------------


def test_prefix_match_hand_traced_two_thirds():
    assert prefix_match_score([MOVE, MOVE, TURN_LEFT], [MOVE, MOVE, PUT]) == 2 / 3


def test_prefix_match_empty_traces():
    assert prefix_match_score([], []) == 1.0
    assert prefix_match_score([], [MOVE]) == 0.0


def test_behavior_match_reflexive(rng):
    program = load_corpus("target_while")
    states = [random_world(rng) for _ in range(5)]
    assert behavior_match(program, program, states) == 1.0


def test_behavior_match_aliasing_pair(rng):
    a = parse("DEF run m( REPEAT R=2 r( move r) m)")
    b = parse("DEF run m( move move m)")
    states = [random_world(rng) for _ in range(8)]
    assert behavior_match(a, b, states) == 1.0


def test_behavior_match_symmetric_and_bounded(rng):
    programs = random_programs(12, seed=21)
    states = [random_world(rng) for _ in range(4)]
    for a, b in zip(programs[::2], programs[1::2]):
        ab = behavior_match(a, b, states)
        ba = behavior_match(b, a, states)
        assert ab == ba
        assert 0.0 <= ab <= 1.0


def test_behavior_match_uses_precomputed_traces(rng):
    a = parse("DEF run m( move move turnLeft m)")
    b = parse("DEF run m( move move putMarker m)")
    states = [open_corridor()]
    traces = [execute(b, s).actions for s in states]
    assert behavior_match(a, b, states, target_traces=traces) == 2 / 3


# --- oracle equivalence -------------------------------------------------------


def test_interpreter_matches_reference_on_fuzz():
    programs = random_programs(1000, seed=13, max_tokens=30)
    world_rng = np.random.default_rng(99)
    for program in programs:
        state = random_world(world_rng)
        assert execute(program, state).actions == reference_trace(program, state)


def test_interpreter_matches_reference_on_corpus():
    from conftest import corpus_programs
    world_rng = np.random.default_rng(5)
    states = [random_world(world_rng) for _ in range(5)]
    for name, text in corpus_programs().items():
        program = parse(text)
        for state in states:
            assert execute(program, state).actions == \
                reference_trace(program, state), name
