import math

import numpy as np
import pytest

from src.errors import EpisodeStateError, NavigationError
from src.models import Rect, RobotState, TerminalSignal, Vec2
from src.simcore import EpisodeConfig, EpisodeEngine, check_terminal, pid_policy, reset_episode, step_kinematics


def _state(x, y, heading=0.0, radius=0.2):
    return RobotState(position=Vec2(x, y), heading=heading, v=0.0, omega=0.0, radius=radius)


def test_straight_line_step():
    nxt = step_kinematics(_state(1.0, 1.0), (0.5, 0.0), 0.2)
    assert nxt.position.x == pytest.approx(1.1)
    assert nxt.position.y == pytest.approx(1.0)
    assert nxt.heading == 0.0
    assert (nxt.v, nxt.omega) == (0.5, 0.0)


def test_exact_arc_step():
    nxt = step_kinematics(_state(0.0, 0.0), (0.5, 1.0), 0.2)
    assert nxt.position.x == pytest.approx(0.5 * math.sin(0.2), abs=1e-12)
    assert nxt.position.y == pytest.approx(-0.5 * (math.cos(0.2) - 1.0), abs=1e-12)
    assert nxt.heading == pytest.approx(0.2)


def test_arc_converges_to_straight_line_for_tiny_turn_rate():
    arc = step_kinematics(_state(0.0, 0.0, 0.3), (0.5, 1e-5), 0.2)
    line = step_kinematics(_state(0.0, 0.0, 0.3), (0.5, 0.0), 0.2)
    assert arc.position.distance_to(line.position) < 1e-6


def test_half_turn_arc_example():
    nxt = step_kinematics(_state(0.0, 0.0), (1.0, math.pi), 1.0)
    assert nxt.position.x == pytest.approx(0.0, abs=1e-12)
    assert nxt.position.y == pytest.approx(2.0 / math.pi, abs=1e-12)
    assert nxt.heading == pytest.approx(math.pi)


def test_step_length_is_continuous_across_the_straight_line_switch():
    start = _state(1.0, 2.0, 0.4)
    ends = []
    for omega in (0.9999e-6, 1e-6, 1.0001e-6, -1e-6):
        nxt = step_kinematics(start, (0.5, omega), 0.2)
        assert start.position.distance_to(nxt.position) == pytest.approx(0.1, abs=1e-9)
        ends.append(nxt.position)
    # Lateral offset of the arc over one step is v * omega * dt^2 / 2, about 1e-8 here.
    assert max(ends[0].distance_to(p) for p in ends) < 1e-7


def test_rotation_in_place_keeps_position():
    nxt = step_kinematics(_state(2.0, 3.0), (0.0, 1.0), 0.2)
    assert nxt.position == Vec2(2.0, 3.0)
    assert nxt.heading == pytest.approx(0.2)


def test_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        step_kinematics(_state(1.0, 1.0), (0.1, 0.0), 0.0)


def test_goal_wins_over_collision(empty_room):
    cfg = EpisodeConfig()
    state = _state(0.1, 4.0)
    signal = check_terminal(state, Vec2(0.15, 4.0), empty_room, cfg, 1.0, 1)
    assert signal is TerminalSignal.GOAL


def test_collision_and_timeout(empty_room):
    cfg = EpisodeConfig(max_steps=5)
    assert check_terminal(_state(0.1, 4.0), Vec2(4.0, 4.0), empty_room, cfg, 1.0, 1) is TerminalSignal.COLLISION
    assert check_terminal(_state(4.0, 4.0), Vec2(6.0, 4.0), empty_room, cfg, 1.0, 5) is TerminalSignal.TIMEOUT
    assert check_terminal(_state(4.0, 4.0), Vec2(6.0, 4.0), empty_room, cfg, 1.0, 4) is TerminalSignal.NONE


def test_goal_tolerance_is_measured_in_imagined_space(empty_room):
    cfg = EpisodeConfig()
    # 0.2 m apart in the simulation is 0.4 m once magnified by rho = 2.
    assert check_terminal(_state(4.0, 4.0), Vec2(4.2, 4.0), empty_room, cfg, 1.0, 1) is TerminalSignal.GOAL
    assert check_terminal(_state(4.0, 4.0), Vec2(4.2, 4.0), empty_room, cfg, 2.0, 1) is TerminalSignal.NONE


def test_terminal_signal_flags():
    assert TerminalSignal.GOAL.done_flag and TerminalSignal.COLLISION.done_flag
    assert not TerminalSignal.TIMEOUT.done_flag
    assert TerminalSignal.TIMEOUT.is_terminal and not TerminalSignal.NONE.is_terminal
    assert TerminalSignal.GOAL.outcome == "success"


def test_reset_episode_samples_valid_start_and_goal(env1):
    cfg = EpisodeConfig()
    rng = np.random.default_rng(9)
    for rho in (1.0, 2.5):
        state, goal = reset_episode(env1, cfg, rng, rho)
        assert state.radius == pytest.approx(cfg.robot_radius / rho)
        assert env1.spawn_window.contains(state.position)
        assert -math.pi < state.heading <= math.pi
        assert Rect.centered(state.position, 8.0).contains(goal)
        assert rho * state.position.distance_to(goal) >= cfg.goal_tolerance
        assert check_terminal(state, goal, env1, cfg, rho, 0) is TerminalSignal.NONE


def test_engine_refuses_to_step_after_termination(empty_room):
    cfg = EpisodeConfig(max_steps=2)
    engine = EpisodeEngine.from_pose(empty_room, cfg, Vec2(4.0, 4.0), 0.0, Vec2(7.0, 7.0))
    engine.step((0.0, 0.0))
    assert engine.step((0.0, 0.0)) is TerminalSignal.TIMEOUT
    assert engine.steps == 2
    with pytest.raises(EpisodeStateError):
        engine.step((0.0, 0.0))


def test_engine_radius_follows_rho(empty_room):
    engine = EpisodeEngine.from_pose(empty_room, EpisodeConfig(), Vec2(4.0, 4.0), 0.0, Vec2(7.0, 7.0), rho=4.0)
    assert engine.state.radius == pytest.approx(0.05)


def test_pid_policy():
    cfg = EpisodeConfig()
    assert pid_policy(3.0, 0.0, cfg) == (0.5, 0.0)
    v, omega = pid_policy(0.2, 0.1, cfg)
    assert v == pytest.approx(0.2 * math.cos(0.1))
    assert omega == pytest.approx(0.2)
    assert pid_policy(3.0, math.pi, cfg) == (0.0, 1.0)
    assert pid_policy(3.0, -2.0, cfg)[1] == -1.0


def test_engine_state_errors_belong_to_the_navigation_hierarchy():
    assert issubclass(EpisodeStateError, NavigationError)


def test_engine_rejects_commands_beyond_the_limits(empty_room):
    engine = EpisodeEngine.from_pose(empty_room, EpisodeConfig(), Vec2(4.0, 4.0), 0.0, Vec2(7.0, 7.0))
    for command in ((0.6, 0.0), (-0.1, 0.0), (0.2, 1.5)):
        with pytest.raises(ValueError):
            engine.step(command)
    assert engine.steps == 0


def test_robot_state_invariants():
    with pytest.raises(ValueError):
        _state(1.0, 1.0, heading=-math.pi)
    with pytest.raises(ValueError):
        RobotState(position=Vec2(1.0, 1.0), heading=0.0, v=-0.1, omega=0.0, radius=0.2)
    assert _state(1.0, 1.0, heading=math.pi).heading == math.pi
