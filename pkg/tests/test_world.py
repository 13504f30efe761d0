import math

import numpy as np
import pytest

from src.errors import SamplingExhaustedError, ScenarioParseError, ScenarioValidationError, WorldDomainError
from src.models import Rect, Scenario, Segment, Vec2
from src.world import (
    boundary_segments,
    build_scenario,
    cast_rays,
    collision_check,
    lidar_scan,
    parse_scenario,
    raycast,
    sample_free_pose,
    scale_scenario,
    wrap_angle,
)


def _brute_force(segments, origin, angle, max_range):
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    best = max_range
    for ax, ay, bx, by in segments:
        ex, ey = bx - ax, by - ay
        det = dx * ey - dy * ex
        if abs(det) < 1e-12:
            continue
        wx, wy = ax - ox, ay - oy
        t = (wx * ey - wy * ex) / det
        u = (wx * dy - wy * dx) / det
        if t > 0 and 0 <= u <= 1:
            best = min(best, t)
    return best


def _random_scenario(rng, name):
    segments = []
    while len(segments) < 6:
        ax, ay, bx, by = rng.uniform(0.5, 9.5, size=4)
        if math.hypot(bx - ax, by - ay) > 0.5:
            segments.append(Segment(Vec2(ax, ay), Vec2(bx, by)))
    return build_scenario(name, Rect(0.0, 0.0, 10.0, 10.0), segments, Rect(1.0, 1.0, 9.0, 9.0))


def test_env1_has_boundary_plus_interior_segments(env1):
    assert env1.name == "env1"
    assert len(env1.obstacles) == 14
    assert env1.segment_array.shape == (14, 4)


def test_parse_scenario_names_missing_field():
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario("name: x\nbounds: [0, 0, 4, 4]\nsegments: []\n")
    assert excinfo.value.field == "spawn_window"


def test_parse_scenario_rejects_unknown_field():
    text = "name: x\nbounds: [0, 0, 4, 4]\nsegments: []\nspawn_window: [1, 1, 3, 3]\ncolour: red\n"
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario(text)
    assert excinfo.value.field == "colour"


def test_parse_scenario_rejects_bad_segment():
    text = "name: x\nbounds: [0, 0, 4, 4]\nsegments: [[1, 1, 2]]\nspawn_window: [1, 1, 3, 3]\n"
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario(text)
    assert excinfo.value.field == "segments[0]"


def test_degenerate_segment_rejected():
    with pytest.raises(ScenarioValidationError):
        Segment(Vec2(1.0, 1.0), Vec2(1.0, 1.0))


def test_segment_outside_bounds_rejected():
    with pytest.raises(ScenarioValidationError):
        build_scenario("bad", Rect(0, 0, 4, 4), [Segment(Vec2(1, 1), Vec2(5, 1))], Rect(1, 1, 3, 3))


def test_spawn_window_must_lie_inside_bounds():
    with pytest.raises(ScenarioValidationError):
        build_scenario("bad", Rect(0, 0, 4, 4), [], Rect(1, 1, 5, 3))


def test_raycast_hits_boundary(empty_room):
    assert raycast(empty_room, Vec2(4.0, 4.0), 0.0, 30.0) == pytest.approx(4.0, abs=1e-12)
    assert raycast(empty_room, Vec2(1.0, 2.0), math.pi / 2, 30.0) == pytest.approx(6.0, abs=1e-12)


def test_raycast_clips_to_max_range(empty_room):
    assert raycast(empty_room, Vec2(4.0, 4.0), 0.0, 2.0) == 2.0


def test_ray_origin_outside_bounds_is_a_domain_error(empty_room):
    with pytest.raises(WorldDomainError):
        raycast(empty_room, Vec2(9.0, 4.0), 0.0, 30.0)
    with pytest.raises(WorldDomainError):
        raycast(empty_room, Vec2(0.0, 4.0), 0.0, 30.0)


def test_cast_rays_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for k in range(5):
        s = _random_scenario(rng, f"random{k}")
        origins = rng.uniform(0.1, 9.9, size=(1000, 2))
        angles = rng.uniform(-math.pi, math.pi, size=1000)
        fast = cast_rays(s, origins, angles, 30.0)
        slow = [_brute_force(s.segment_array, o, a, 30.0) for o, a in zip(origins, angles)]
        np.testing.assert_allclose(fast, slow, rtol=0.0, atol=1e-9)


def test_raycast_scale_equivariance(env1):
    rng = np.random.default_rng(11)
    origins = rng.uniform(0.2, 7.8, size=(300, 2))
    angles = rng.uniform(-math.pi, math.pi, size=300)
    base = cast_rays(env1, origins, angles, 30.0)
    for rho in (1.5, 2.0, 4.0):
        scaled = cast_rays(scale_scenario(env1, rho), rho * origins, angles, rho * 30.0)
        np.testing.assert_allclose(scaled, rho * base, rtol=1e-9)


def _rotate(p, theta, center):
    c, s = math.cos(theta), math.sin(theta)
    x, y = p[0] - center[0], p[1] - center[1]
    return center[0] + c * x - s * y, center[1] + s * x + c * y


def test_raycast_rotation_equivariance(env1):
    theta, center = 0.7, (4.0, 4.0)
    # Every rotated env1 segment fits inside a 12 m box around the room center.
    outer = Rect(-2.0, -2.0, 10.0, 10.0)
    rotated = [
        Segment(Vec2(*_rotate((ax, ay), theta, center)), Vec2(*_rotate((bx, by), theta, center)))
        for ax, ay, bx, by in env1.segment_array
    ]
    turned = Scenario(
        name="env1_rot",
        bounds=outer,
        obstacles=tuple(boundary_segments(outer) + rotated),
        spawn_window=env1.spawn_window,
    )

    rng = np.random.default_rng(19)
    origins = rng.uniform(0.2, 7.8, size=(2000, 2))
    angles = rng.uniform(-math.pi, math.pi, size=2000)
    base = cast_rays(env1, origins, angles, 30.0)
    turned_origins = np.array([_rotate(o, theta, center) for o in origins])
    out = cast_rays(turned, turned_origins, angles + theta, 30.0)
    np.testing.assert_allclose(out, base, rtol=0.0, atol=1e-9)


def test_scale_scenario_scales_every_coordinate(env1):
    doubled = scale_scenario(env1, 2.0)
    assert doubled.bounds == Rect(0.0, 0.0, 16.0, 16.0)
    assert doubled.spawn_window == Rect(1.0, 1.0, 15.0, 15.0)
    np.testing.assert_allclose(doubled.segment_array, 2.0 * env1.segment_array)


def test_lidar_scan_beam_layout(empty_room):
    # First beam points at -135 deg and meets the floor at (1, 0); the last meets the left wall at (0, 7).
    scan = lidar_scan(empty_room, (Vec2(4.0, 3.0), 0.0), 1.5 * math.pi, 1080, 30.0)
    assert scan.shape == (1080,)
    assert scan[0] == pytest.approx(3.0 * math.sqrt(2.0), abs=1e-9)
    assert scan[-1] == pytest.approx(4.0 * math.sqrt(2.0), abs=1e-9)
    assert np.all(scan <= 30.0)


def test_collision_check_is_strict(empty_room):
    assert not collision_check(empty_room, Vec2(4.0, 4.0), 0.2)
    assert collision_check(empty_room, Vec2(0.1, 4.0), 0.2)
    assert not collision_check(empty_room, Vec2(0.2, 4.0), 0.2)


def test_sample_free_pose_respects_clearance_and_window(env1):
    rng = np.random.default_rng(3)
    window = Rect(0.5, 0.5, 7.5, 7.5)
    for _ in range(50):
        p = sample_free_pose(env1, rng, 0.3, window)
        assert window.contains(p)
        assert not collision_check(env1, p, 0.3)


def test_sample_free_pose_is_seeded(env1):
    a = sample_free_pose(env1, np.random.default_rng(5), 0.2, env1.spawn_window)
    b = sample_free_pose(env1, np.random.default_rng(5), 0.2, env1.spawn_window)
    assert a == b


def test_sample_free_pose_gives_up(empty_room):
    with pytest.raises(SamplingExhaustedError):
        sample_free_pose(empty_room, np.random.default_rng(0), 5.0, empty_room.spawn_window)


def test_wrap_angle():
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(2.0 * math.pi + 0.5) == pytest.approx(0.5)
    assert wrap_angle(-0.25) == -0.25


def test_collision_check_is_monotone_in_radius(env1):
    rng = np.random.default_rng(23)
    radii = np.linspace(0.05, 1.5, 30)
    for x, y in rng.uniform(0.1, 7.9, size=(300, 2)):
        hits = [collision_check(env1, Vec2(float(x), float(y)), float(r)) for r in radii]
        # Once a radius collides, every larger one does too.
        assert hits == sorted(hits)
