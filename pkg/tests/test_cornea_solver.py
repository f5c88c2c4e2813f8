from dataclasses import replace

import numpy as np
import pytest

from conftest import random_eyes
from modules.core.errors import InsufficientConstraints, InsufficientGlints, NoFeasibleZ
from modules.cornea.estimator import CorneaSolver
from modules.cornea.lifting import LiftConfig, lift_cornea_to_3d, lift_losses
from modules.cornea.ray_solver import led_image_points
from modules.cornea.refinement import (DEFAULT_STEP_SIZE, RefinementConfig, refine_cornea2d_and_glints,
                                       refinement_gradient, refinement_loss, tune_step_size, tuning_problems)
from modules.cornea.supervision import supervise_cornea2d
from modules.evaluation.metrics import paired_bootstrap_ci
from modules.geometry.camera import back_project, project
from modules.geometry.primitives import Sphere
from modules.simulation.frame_synth import GlintObservation, NoiseSpec, apply_noise, forward_observation
from modules.simulation.glint_reflection import solve_glint_reflection
from modules.simulation.protocol import DatasetFrame, protocol_targets
from modules.utils.gradcheck import check_gradient


def exact_glints(rig, camera, cornea):
    return [(label, project(camera, solve_glint_reflection(rig.position(label), cornea))) for label in rig.labels]


def on_grid_cornea(camera, pixel, z=35.0, radius=8.0):
    direction = back_project(camera, pixel)
    return Sphere(direction * (z / direction[2]), radius)


class TestRefinement:

    def _setup(self, eye, rig, camera):
        obs = forward_observation(eye, rig, camera)
        glints = np.array([g.position for g in obs.glints])
        return obs.truth.cornea_2d, glints, led_image_points(rig, camera)

    def test_gradient_matches_finite_differences(self, subject, rig, camera):
        rng = np.random.default_rng(0)
        for eye in random_eyes(subject, 20, seed=4):
            c0, g0, leds = self._setup(eye, rig, camera)
            c = c0 + rng.normal(scale=5.0, size=2)
            g = g0 + rng.normal(scale=2.0, size=g0.shape)
            prior = c0 + rng.normal(scale=1.0, size=2)

            def loss(x):
                return refinement_loss(x[:2], x[2:].reshape(-1, 2), leds, g0, 0.1, True, prior, 0.05)

            def grad(x):
                gc, gg = refinement_gradient(x[:2], x[2:].reshape(-1, 2), leds, g0, 0.1, True, prior, 0.05)
                return np.concatenate([gc, gg.reshape(-1)])

            assert check_gradient(loss, grad, np.concatenate([c, g.reshape(-1)]), h=1e-4) < 1e-5

    def test_cornea_converges_with_fixed_glints(self, straight_eye, rig, camera):
        c0, glints, leds = self._setup(straight_eye, rig, camera)
        config = RefinementConfig(steps=100, step_size=0.2, glint_freedom=False)
        result = refine_cornea2d_and_glints(c0 + [3.0, 4.0], glints, leds, config)
        assert np.linalg.norm(result.cornea_2d - c0) < 0.05
        assert len(result.trace) == 101
        assert result.monotonic

    def test_joint_refinement_converges_at_defaults(self, subject, rig, camera):
        for eye in random_eyes(subject, 20, seed=3):
            c0, glints, leds = self._setup(eye, rig, camera)
            result = refine_cornea2d_and_glints(c0 + [3.0, 4.0], glints, leds, RefinementConfig())
            assert np.linalg.norm(result.cornea_2d - c0) < 0.05
            assert result.monotonic

    def test_prior_blends_with_line_intersection(self, straight_eye, rig, camera):
        c0, glints, leds = self._setup(straight_eye, rig, camera)
        config = RefinementConfig()
        # four exact lines, two per normal direction: the prior keeps
        # prior_weight / (prior_weight + 2 * tether / (1 + 4 * tether)) of its offset
        share = config.prior_weight / (config.prior_weight + 2 * config.tether_weight / (1 + 4 * config.tether_weight))
        offset = np.array([2.0, 0.0])
        result = refine_cornea2d_and_glints(c0, glints, leds, config, prior=c0 + offset)
        np.testing.assert_allclose(result.cornea_2d - c0, share * offset, atol=0.01)

        free = refine_cornea2d_and_glints(c0, glints, leds, config, prior=None)
        assert np.linalg.norm(free.cornea_2d - c0) < 1e-6

    def test_non_finite_prior_is_ignored(self, straight_eye, rig, camera):
        c0, glints, leds = self._setup(straight_eye, rig, camera)
        with_nan = refine_cornea2d_and_glints(c0 + [1.0, 1.0], glints, leds, RefinementConfig(), prior=[np.nan, 0.0])
        without = refine_cornea2d_and_glints(c0 + [1.0, 1.0], glints, leds, RefinementConfig())
        np.testing.assert_array_equal(with_nan.cornea_2d, without.cornea_2d)

    def test_trace_non_increasing_on_noisy_frames(self, subject, rig, camera):
        monotonic = 0
        eyes = random_eyes(subject, 100, seed=5)
        for i, eye in enumerate(eyes):
            exact = forward_observation(eye, rig, camera)
            noisy = apply_noise(exact, NoiseSpec(keypoint_sigma=0.5), np.random.default_rng(i))
            glints = np.array([g.position for g in noisy.glints])
            result = refine_cornea2d_and_glints(noisy.cornea_2d, glints, led_image_points(rig, camera),
                                                RefinementConfig())
            monotonic += result.monotonic
        assert monotonic >= 99

    def test_zero_steps_returns_input(self, straight_eye, rig, camera):
        c0, glints, leds = self._setup(straight_eye, rig, camera)
        result = refine_cornea2d_and_glints(c0, glints, leds, RefinementConfig(steps=0))
        np.testing.assert_array_equal(result.cornea_2d, c0)
        assert len(result.trace) == 1

    def test_degenerate_line_is_excluded(self):
        leds = np.array([[100.0, 100.0, 1.0], [200.0, 100.0, 1.0], [150.0, 300.0, 1.0]])
        glints = np.array([[100.0, 100.0], [210.0, 120.0], [160.0, 280.0]])
        result = refine_cornea2d_and_glints([150.0, 150.0], glints, leds, RefinementConfig(steps=5))
        assert list(result.used) == [False, True, True]
        np.testing.assert_array_equal(result.glints[0], glints[0])

    def test_too_few_usable_lines(self):
        leds = np.array([[100.0, 100.0, 1.0], [200.0, 100.0, 1.0]])
        glints = np.array([[100.0, 100.0], [210.0, 120.0]])
        with pytest.raises(InsufficientGlints):
            refine_cornea2d_and_glints([150.0, 150.0], glints, leds, RefinementConfig())


class TestStepSizeTuning:

    @pytest.fixture
    def problems(self, subject, rig, camera):
        observations = []
        for i, eye in enumerate(random_eyes(subject, 10, seed=13)):
            exact = forward_observation(eye, rig, camera)
            observations.append(apply_noise(exact, NoiseSpec(keypoint_sigma=0.5, cornea_sigma=2.0),
                                            np.random.default_rng(200 + i)))
        four_glint = [p for p in tuning_problems(observations, rig, camera) if len(p[1]) == 4]
        assert len(four_glint) >= 5
        return four_glint

    def test_bound_on_four_glint_frames(self, problems):
        # largest Hessian eigenvalue per axis is about 1.573 at tether 0.1
        bound = tune_step_size(problems, iterations=20)
        assert 1.2 < bound < 1.35

    def test_default_step_sits_well_inside_bound(self, problems):
        bound = tune_step_size(problems, iterations=20)
        assert RefinementConfig().step_size <= 0.5 * bound
        assert RefinementConfig().step_size == DEFAULT_STEP_SIZE

    def test_step_above_bound_breaks_monotonicity(self, problems):
        bound = tune_step_size(problems, iterations=20)
        above = replace(RefinementConfig(), step_size=1.05 * bound)
        assert not all(refine_cornea2d_and_glints(c, g, leds, above).monotonic for c, g, leds in problems)

    def test_frames_without_cornea_observation_are_skipped(self, straight_eye, rig, camera):
        obs = forward_observation(straight_eye, rig, camera)
        obs.cornea_2d = None
        assert tuning_problems([obs], rig, camera) == []

    def test_no_problems(self):
        with pytest.raises(ValueError):
            tune_step_size([])

    def test_upper_bracket_must_diverge(self, problems):
        with pytest.raises(ValueError):
            tune_step_size(problems, high=0.1)


class TestLifting:

    def test_exact_depth_on_grid(self, rig, camera):
        rng = np.random.default_rng(8)
        config = LiftConfig()
        for _ in range(100):
            cornea = on_grid_cornea(camera, rng.uniform([250.0, 180.0], [390.0, 300.0]))
            glints = exact_glints(rig, camera, cornea)
            result = lift_cornea_to_3d(project(camera, cornea.center), glints, rig, camera, config)
            assert abs(result.z - 35.0) <= config.z_step
            assert result.loss < 1e-10

    def test_matches_brute_force_minimum(self, straight_eye, rig, camera):
        glints = exact_glints(rig, camera, straight_eye.cornea)
        cornea_2d = project(camera, straight_eye.cornea.center)
        result = lift_cornea_to_3d(cornea_2d, glints, rig, camera)
        z, losses = lift_losses(cornea_2d, glints, rig, camera)
        assert result.loss == losses.min()
        assert result.z == z[np.argmin(losses)]

    def test_coarse_to_fine_agrees_with_full_grid(self, subject, rig, camera):
        coarse = LiftConfig(coarse_to_fine=True)
        for eye in random_eyes(subject, 20, seed=6):
            glints = exact_glints(rig, camera, eye.cornea)
            cornea_2d = project(camera, eye.cornea.center)
            full = lift_cornea_to_3d(cornea_2d, glints, rig, camera)
            fast = lift_cornea_to_3d(cornea_2d, glints, rig, camera, coarse)
            assert abs(full.grid_index - fast.grid_index) <= 1

    def test_half_line_on_exact_glints(self, rig, camera):
        cornea = on_grid_cornea(camera, [330.0, 250.0])
        glints = exact_glints(rig, camera, cornea)
        result = lift_cornea_to_3d(project(camera, cornea.center), glints, rig, camera, LiftConfig(half_line=True))
        assert abs(result.z - 35.0) <= 0.001

    def test_no_feasible_depth(self, rig, camera):
        glints = exact_glints(rig, camera, on_grid_cornea(camera, [320.0, 240.0]))
        with pytest.raises(NoFeasibleZ):
            lift_cornea_to_3d([0.0, 0.0], glints, rig, camera, LiftConfig(z_min=20.0, z_max=50.0))

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            LiftConfig(z_min=50.0, z_max=10.0)


class TestCorneaSolver:

    def test_svd_lift_recovers_cornea(self, config, subject, rig, camera):
        solver = CorneaSolver(config, camera, rig)
        for eye in random_eyes(subject, 10, seed=7):
            estimate = solver.estimate(forward_observation(eye, rig, camera), "svd-lift")
            assert np.linalg.norm(estimate.cornea_3d - eye.cornea.center) < 0.01

    def test_raw_lift_needs_cornea_observation(self, config, straight_eye, rig, camera):
        obs = forward_observation(straight_eye, rig, camera)
        obs.cornea_2d = None
        with pytest.raises(InsufficientConstraints):
            CorneaSolver(config, camera, rig).estimate(obs, "raw-lift")

    def test_single_glint(self, config, straight_eye, rig, camera):
        obs = forward_observation(straight_eye, rig, camera)
        obs.glints = [obs.glints[0]] + [GlintObservation(g.label) for g in obs.glints[1:]]
        with pytest.raises(InsufficientGlints):
            CorneaSolver(config, camera, rig).estimate(obs, "svd-lift")

    def test_unknown_mode(self, config, straight_eye, rig, camera):
        with pytest.raises(ValueError):
            CorneaSolver(config, camera, rig).estimate(forward_observation(straight_eye, rig, camera), "magic")

    def test_refinement_beats_svd_on_noisy_frames(self, config, subject, rig, camera):
        config.set('solver.coarse_to_fine', True)
        solver = CorneaSolver(config, camera, rig)
        noise = NoiseSpec(keypoint_sigma=0.5, cornea_sigma=0.5)
        svd_errors, refine_errors = [], []
        for i, eye in enumerate(random_eyes(subject, 300, seed=9)):
            noisy = apply_noise(forward_observation(eye, rig, camera), noise, np.random.default_rng(100 + i))
            svd_errors.append(np.linalg.norm(solver.estimate(noisy, "svd-lift").cornea_3d - eye.cornea.center))
            refine_errors.append(np.linalg.norm(solver.estimate(noisy, "refine-lift").cornea_3d - eye.cornea.center))
        lo, hi = paired_bootstrap_ci(np.array(refine_errors), np.array(svd_errors))
        assert hi < 0

    def test_median_error_grows_with_noise(self, config, subject, rig, camera):
        config.set('solver.coarse_to_fine', True)
        solver = CorneaSolver(config, camera, rig)
        eyes = random_eyes(subject, 100, seed=14)
        medians = []
        for sigma in (0.0, 0.25, 0.5, 1.0):
            errors = []
            for i, eye in enumerate(eyes):
                noisy = apply_noise(forward_observation(eye, rig, camera), NoiseSpec(keypoint_sigma=sigma),
                                    np.random.default_rng(300 + i))
                errors.append(np.linalg.norm(solver.estimate(noisy, "svd-lift").cornea_3d - eye.cornea.center))
            medians.append(np.median(errors))
        assert all(a <= b for a, b in zip(medians, medians[1:]))


class TestSupervision:

    def test_labels_and_failures(self, subject, rig, camera):
        eyes = random_eyes(subject, 3, seed=12)
        targets = protocol_targets([0.0, 0.0, 35.0])
        frames = [DatasetFrame(0, targets[i], 0, eye, forward_observation(eye, rig, camera))
                  for i, eye in enumerate(eyes)]
        frames[2].observation.glints = [GlintObservation(g.label) for g in frames[2].observation.glints]

        labels, failures = supervise_cornea2d(frames, rig, camera)
        assert set(labels) == {frames[0].key, frames[1].key}
        assert failures == {"InsufficientGlints": 1}
        for frame in frames[:2]:
            assert np.linalg.norm(labels[frame.key] - frame.observation.truth.cornea_2d) < 1e-4
