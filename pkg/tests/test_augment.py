import math

import numpy as np
import pytest

from src.augment import AugmentConfig, sample_rho, scale_action, scale_observation, scaled_radius
from src.models import StateVector, TerminalSignal, Vec2
from src.perception import SensorLimits, observe
from src.simcore import EpisodeConfig, EpisodeEngine, pid_policy
from src.world import scale_scenario


def _sv():
    return StateVector(scans=np.tile([1.0, 8.0, 20.0], 10), d_goal=5.0, phi_goal=0.7, v=0.2, omega=-0.4)


def test_sample_rho_disabled_when_probability_is_zero():
    rng = np.random.default_rng(0)
    cfg = AugmentConfig(probability=0.0)
    assert all(sample_rho(rng, cfg) == 1.0 for _ in range(200))


def test_sample_rho_stays_in_range():
    rng = np.random.default_rng(0)
    cfg = AugmentConfig(probability=1.0, upper_bound=4.0)
    draws = [sample_rho(rng, cfg) for _ in range(100_000)]
    assert min(draws) >= 1.0 and max(draws) <= 4.0
    assert np.mean(draws) == pytest.approx(2.5, abs=0.02)


class _ScriptedRng:
    def __init__(self, *values):
        self.values = list(values)

    def uniform(self, low, high):
        return self.values.pop(0)


def test_sample_rho_branches_on_the_first_draw():
    cfg = AugmentConfig(probability=0.5, upper_bound=4.0)
    assert sample_rho(_ScriptedRng(0.7), cfg) == 1.0
    assert sample_rho(_ScriptedRng(0.5), cfg) == 1.0
    assert sample_rho(_ScriptedRng(0.3, 2.75), cfg) == 2.75


def test_sample_rho_mixes_with_probability():
    rng = np.random.default_rng(1)
    cfg = AugmentConfig(probability=0.5)
    draws = np.array([sample_rho(rng, cfg) for _ in range(2000)])
    assert np.mean(draws == 1.0) == pytest.approx(0.5, abs=0.05)


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(probability=1.5)
    with pytest.raises(ValueError):
        AugmentConfig(upper_bound=1.0)


def test_scale_observation_identity_at_rho_one():
    sv = _sv()
    assert scale_observation(sv, 1.0, AugmentConfig()) is sv


def test_scale_observation_scales_distance_channels_only():
    out = scale_observation(_sv(), 2.0, AugmentConfig())
    np.testing.assert_allclose(out.scans, np.tile([2.0, 16.0, 30.0], 10))
    assert out.d_goal == 10.0
    assert out.v == 0.4
    assert out.phi_goal == 0.7
    assert out.omega == -0.4


def test_scale_observation_clips_at_limits():
    cfg = AugmentConfig(limits=SensorLimits(scan_max=30.0, d_max=12.0, v_max=0.5, omega_max=1.0))
    out = scale_observation(_sv(), 4.0, cfg)
    assert out.d_goal == 12.0
    assert out.v == 0.5
    assert out.scans.max() == 30.0


def test_scale_action_and_radius():
    assert scale_action((0.4, 0.9), 2.0) == (0.2, 0.9)
    assert scaled_radius(0.2, 4.0) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        scaled_radius(0.0, 2.0)


def test_augmented_rollout_matches_rollout_in_scaled_world(env1):
    """Scan, goal and velocity channels seen at rho = 2 equal those of the doubled room."""
    rho = 2.0
    cfg = EpisodeConfig()
    aug = AugmentConfig()
    start, goal, heading = Vec2(1.0, 4.0), Vec2(6.0, 4.0), 0.3

    imagined = EpisodeEngine.from_pose(env1, cfg, start, heading, goal, rho=rho)
    real = EpisodeEngine.from_pose(scale_scenario(env1, rho), cfg, start.scaled(rho), heading, goal.scaled(rho))
    assert real.state.radius == pytest.approx(rho * imagined.state.radius)

    for _ in range(50):
        sv_i = scale_observation(observe(env1, imagined.state, imagined.goal), rho, aug)
        sv_r = observe(real.scenario, real.state, real.goal)
        np.testing.assert_allclose(sv_i.scans, sv_r.scans, rtol=0.0, atol=1e-6)
        assert sv_i.d_goal == pytest.approx(sv_r.d_goal, abs=1e-6)
        assert sv_i.phi_goal == pytest.approx(sv_r.phi_goal, abs=1e-6)
        assert sv_i.v == pytest.approx(sv_r.v, abs=1e-6)
        assert sv_i.omega == pytest.approx(sv_r.omega, abs=1e-6)
        assert sv_i.scans.max() < 30.0 and sv_i.d_goal < 12.0

        command = pid_policy(sv_i.d_goal, sv_i.phi_goal, cfg)
        signal_i = imagined.step(scale_action(command, rho))
        signal_r = real.step(command)
        assert signal_i is signal_r is TerminalSignal.NONE
        assert real.state.position.distance_to(imagined.state.position.scaled(rho)) < 1e-6
        assert math.isclose(real.state.heading, imagined.state.heading, abs_tol=1e-9)
