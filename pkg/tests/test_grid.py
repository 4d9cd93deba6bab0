import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from karelsynth import grid
from karelsynth.grid import (EAST, MARKER_CAP, MOVE, NORTH, PICK_MARKER,
                             PUT_MARKER, SOUTH, TURN_LEFT, TURN_RIGHT, WEST,
                             apply_action, make_state, perceive, random_world)


def boxed_agent():
    """Agent enclosed by walls on all four sides."""
    return make_state(5, 5, agent=(2, 2), direction=NORTH,
                      wall_cells=[(1, 2), (3, 2), (2, 1), (2, 3)])


def test_blocked_move_is_identity_on_pose():
    state = boxed_agent()
    result = apply_action(state, MOVE)
    assert result.blocked
    assert result.state.agent_pos == state.agent_pos
    assert result.state.agent_dir == state.agent_dir


def test_four_left_turns_restore_direction():
    state = make_state(4, 4, agent=(1, 1), direction=EAST)
    for _ in range(4):
        state = apply_action(state, TURN_LEFT).state
    assert state.agent_dir == EAST


def test_pick_decrements_single_marker():
    state = make_state(4, 4, agent=(1, 1), direction=EAST,
                       marker_cells={(1, 1): 2})
    result = apply_action(state, PICK_MARKER)
    assert result.picked
    assert result.state.markers[1, 1] == 1
    # the original state is untouched
    assert state.markers[1, 1] == 2


def test_pick_on_empty_cell_flags_no_op():
    state = make_state(4, 4, agent=(1, 1), direction=EAST)
    result = apply_action(state, PICK_MARKER)
    assert result.empty_pick and not result.picked
    assert result.state == state


def test_put_at_cap_flags_overflow():
    state = make_state(4, 4, agent=(1, 1), direction=EAST,
                       marker_cells={(1, 1): MARKER_CAP})
    result = apply_action(state, PUT_MARKER)
    assert result.overflow and not result.put
    assert result.state.markers[1, 1] == MARKER_CAP


def test_move_advances_one_cell_in_heading():
    state = make_state(5, 5, agent=(2, 2), direction=EAST)
    assert apply_action(state, MOVE).state.agent_pos == (2, 3)
    state = make_state(5, 5, agent=(2, 2), direction=SOUTH)
    assert apply_action(state, MOVE).state.agent_pos == (3, 2)


def test_boxed_agent_sees_nothing_clear():
    p = perceive(boxed_agent())
    assert not p.front_is_clear and not p.left_is_clear and not p.right_is_clear


def test_marker_sensors_are_complements():
    state = make_state(4, 4, agent=(1, 1), direction=EAST,
                       marker_cells={(1, 1): 1})
    p = perceive(state)
    assert p.markers_present and not p.no_markers_present


def test_front_clear_relative_to_east():
    state = make_state(5, 5, agent=(2, 2), direction=EAST)
    p = perceive(state)
    assert p.front_is_clear  # (2,3) open
    assert p.left_is_clear   # north (1,2) open
    assert p.right_is_clear  # south (3,2) open


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000), action=st.integers(0, 4))
def test_apply_action_total_and_deterministic(seed, action):
    state = random_world(np.random.default_rng(seed))
    first = apply_action(state, action)
    second = apply_action(state, action)
    assert first.state == second.state
    assert (first.blocked, first.picked, first.put) == \
        (second.blocked, second.picked, second.put)
    first.state.validate()


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_perception_complement_invariant(seed):
    state = random_world(np.random.default_rng(seed))
    p = perceive(state)
    assert p.no_markers_present == (not p.markers_present)


def test_random_world_is_enclosed_and_valid(rng):
    for _ in range(50):
        random_world(rng).validate()


def test_invalid_action_raises():
    state = make_state(4, 4, agent=(1, 1), direction=EAST)
    with pytest.raises(ValueError):
        apply_action(state, 9)


def test_grid_text_render_roundtrip_markers():
    state = make_state(4, 5, agent=(1, 1), direction=WEST,
                       marker_cells={(2, 2): 3})
    text = grid.grid_to_text(state)
    assert text.splitlines()[1][1] == "A"
    assert text.splitlines()[2][2] == "3"
