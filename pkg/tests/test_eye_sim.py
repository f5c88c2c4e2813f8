import numpy as np
import pytest

from conftest import random_eyes
from modules.core.errors import DatasetFormatError
from modules.geometry.camera import project
from modules.geometry.primitives import Sphere, angle_between, normalize
from modules.simulation.dataset_io import read_dataset, write_dataset
from modules.simulation.eye_model import SubjectRanges, eye_pose_for_target, kappa_angle, kappa_rotation
from modules.simulation.frame_synth import NoiseSpec, apply_noise, forward_observation, synthesize_frame
from modules.simulation.glint_reflection import reflection_mismatch, solve_glint_reflection
from modules.simulation.led_rig import LedRig
from modules.simulation.protocol import EyeSimulator, protocol_targets


class TestGlintReflection:

    def test_law_of_reflection(self, subject, rig):
        for eye in random_eyes(subject, 30, seed=1):
            for label in rig.labels:
                g = solve_glint_reflection(rig.position(label), eye.cornea)
                assert abs(np.linalg.norm(g - eye.cornea.center) - eye.cornea.radius) < 1e-9
                assert reflection_mismatch(g, rig.position(label), eye.cornea) < 1e-9

    def test_glint_coplanar_with_camera_led_and_center(self, straight_eye, rig):
        led = rig.position(2)
        g = solve_glint_reflection(led, straight_eye.cornea)
        normal = np.cross(led, straight_eye.cornea.center)
        assert abs(np.dot(normalize(normal), g)) < 1e-9

    def test_led_at_camera_reflects_at_apex(self):
        cornea = Sphere([0.0, 0.0, 35.0], 8.0)
        np.testing.assert_allclose(solve_glint_reflection([0.0, 0.0, 0.0], cornea), [0.0, 0.0, 27.0])


class TestEyePose:

    def test_visual_axis_points_at_target(self, subject):
        target = np.array([80.0, -40.0, -465.0])
        eye = eye_pose_for_target(target, subject)
        assert angle_between(eye.visual_axis, target - eye.cornea.center) < 1e-8

    def test_kappa_angle_is_constant(self, subject):
        expected = kappa_angle(subject.kappa_deg)
        for eye in random_eyes(subject, 20, seed=2):
            assert angle_between(eye.optical_axis, eye.visual_axis) == pytest.approx(expected, abs=1e-9)

    def test_zero_kappa_axes_coincide(self, zero_kappa_subject):
        eye = eye_pose_for_target([30.0, 20.0, -465.0], zero_kappa_subject)
        assert angle_between(eye.optical_axis, eye.visual_axis) < 1e-12

    def test_pupil_on_cornea_sphere(self, straight_eye):
        assert np.linalg.norm(straight_eye.pupil_center_3d - straight_eye.cornea.center) == pytest.approx(8.0)

    def test_subject_sampling_is_seeded(self):
        ranges = SubjectRanges()
        a = ranges.sample(3, np.random.default_rng(9))
        b = ranges.sample(3, np.random.default_rng(9))
        np.testing.assert_array_equal(a.eyeball_center, b.eyeball_center)
        assert a.kappa_deg == b.kappa_deg

    def test_kappa_turns_horizontally_then_vertically(self, subject):
        h, v = np.radians(subject.kappa_deg)
        r_y = np.array([[np.cos(h), 0.0, np.sin(h)], [0.0, 1.0, 0.0], [-np.sin(h), 0.0, np.cos(h)]])
        r_x = np.array([[1.0, 0.0, 0.0], [0.0, np.cos(v), -np.sin(v)], [0.0, np.sin(v), np.cos(v)]])
        np.testing.assert_allclose(kappa_rotation(subject.kappa_deg).as_matrix(), r_x @ r_y, atol=1e-12)
        np.testing.assert_allclose(subject.primary_visual_axis, r_x @ r_y @ [0.0, 0.0, -1.0], atol=1e-12)


class TestFrameSynthesis:

    def test_exact_observation_projects_truth(self, straight_eye, rig, camera):
        obs = forward_observation(straight_eye, rig, camera)
        np.testing.assert_allclose(obs.pupil_2d, project(camera, straight_eye.pupil_center_3d))
        np.testing.assert_allclose(obs.truth.cornea_2d, project(camera, straight_eye.cornea.center))
        assert [g.label for g in obs.glints] == [1, 2, 3, 4]
        assert all(g.present for g in obs.glints)

    def test_square_rig_labels_clockwise_from_top_left(self, straight_eye, rig, camera):
        obs = forward_observation(straight_eye, rig, camera)
        top_left, top_right, bottom_right, bottom_left = (g.position for g in obs.glints)
        assert top_left[0] < top_right[0] and top_left[1] < bottom_left[1]
        assert bottom_right[0] > bottom_left[0] and bottom_right[1] > top_right[1]

    def test_zero_noise_is_exact(self, straight_eye, rig, camera):
        exact = forward_observation(straight_eye, rig, camera)
        noisy = synthesize_frame(straight_eye, rig, camera, NoiseSpec())
        for a, b in zip(exact.glints, noisy.glints):
            np.testing.assert_array_equal(a.position, b.position)
        assert noisy.distractors == []

    def test_common_random_numbers_across_sigma(self, straight_eye, rig, camera):
        exact = forward_observation(straight_eye, rig, camera)
        small = apply_noise(exact, NoiseSpec(keypoint_sigma=0.5), np.random.default_rng(4))
        large = apply_noise(exact, NoiseSpec(keypoint_sigma=1.0), np.random.default_rng(4))
        np.testing.assert_allclose(large.pupil_2d - exact.pupil_2d, 2.0 * (small.pupil_2d - exact.pupil_2d))
        for e, s, l in zip(exact.glints, small.glints, large.glints):
            np.testing.assert_allclose(l.position - e.position, 2.0 * (s.position - e.position))

    def test_noise_has_requested_spread(self, straight_eye, rig, camera):
        exact = forward_observation(straight_eye, rig, camera)
        noise = NoiseSpec(keypoint_sigma=0.5, cornea_sigma=0.5)
        rng = np.random.default_rng(21)
        glint, pupil, cornea = [], [], []
        for _ in range(20000):
            noisy = apply_noise(exact, noise, rng)
            glint.extend(n.position - e.position for n, e in zip(noisy.glints, exact.glints))
            pupil.append(noisy.pupil_2d - exact.pupil_2d)
            cornea.append(noisy.cornea_2d - exact.cornea_2d)
        for residuals in (glint, pupil, cornea):
            assert np.std(np.asarray(residuals)) == pytest.approx(0.5, rel=0.02)

    def test_full_dropout(self, straight_eye, rig, camera):
        obs = synthesize_frame(straight_eye, rig, camera, NoiseSpec(glint_dropout_prob=1.0))
        assert obs.present_glints() == []
        assert obs.pupil_present

    def test_distractors_inside_iris(self, straight_eye, rig, camera):
        obs = synthesize_frame(straight_eye, rig, camera, NoiseSpec(distractor_count_mean=20.0, seed=3))
        assert len(obs.distractors) > 0
        for d in obs.distractors:
            assert np.linalg.norm(d - obs.truth.iris_center_2d) <= obs.truth.iris_radius_px + 1e-9

    def test_cornea_cap_hides_grazing_glints(self, straight_eye, camera):
        far_rig = LedRig(np.array([[-400.0, 0.0, 0.0], [0.0, 0.0, 0.0], [5.0, 5.0, 0.0]]))
        obs = forward_observation(straight_eye, far_rig, camera, cap_deg=20.0)
        assert [g.present for g in obs.glints] == [False, True, True]

    def test_invalid_noise(self):
        with pytest.raises(ValueError):
            NoiseSpec(keypoint_sigma=-1.0)
        with pytest.raises(ValueError):
            NoiseSpec(glint_dropout_prob=1.5)


class TestProtocol:

    def test_targets(self):
        targets = protocol_targets([0.0, 0.0, 35.0])
        assert len(targets) == 54
        assert sum(t.is_calibration for t in targets) == 9
        directions = {tuple(np.round(normalize(t.position - [0.0, 0.0, 35.0]), 9)) for t in targets}
        assert len(directions) == 18

    def test_dataset_is_deterministic(self, config):
        sim = EyeSimulator(config)
        noise = NoiseSpec(keypoint_sigma=0.5, seed=7)
        a = sim.generate_protocol_dataset(1, noise)
        b = sim.generate_protocol_dataset(1, noise)
        assert len(a.frames) == 54
        assert [f.to_dict() for f in a.frames] == [f.to_dict() for f in b.frames]

    def test_dataset_file_round_trip(self, config, tmp_path):
        sim = EyeSimulator(config)
        dataset = sim.generate_protocol_dataset(1, NoiseSpec(seed=1))
        path = tmp_path / "dataset.jsonl"
        write_dataset(path, dataset, config.config_hash())
        header, frames = read_dataset(path)
        assert header["config_hash"] == config.config_hash()
        assert [f.to_dict() for f in frames] == [f.to_dict() for f in dataset.frames]

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"kind": "header", "schema": "other", "schema_version": 1}\n')
        with pytest.raises(DatasetFormatError):
            read_dataset(path)
