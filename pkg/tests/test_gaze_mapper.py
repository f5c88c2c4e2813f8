import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import random_eyes
from modules.core.errors import CoincidentPoints, DatasetFormatError, NoIntersection, NonFiniteLoss, RankDeficient
from modules.gaze.calibration import CalibrationSet, calibration_target_axis, map_gaze
from modules.gaze.mapper_io import load_mapper, save_mapper
from modules.gaze.net_mapper import NetTrainingConfig, build_net_mapper, fit_net_mapper
from modules.gaze.poly_mapper import PolyMapper, fit_poly_mapper
from modules.gaze.pupil_lifting import OpticalAxis, lift_pupil_to_3d, optical_axis
from modules.geometry.primitives import angle_between
from modules.simulation.eye_model import eye_pose_for_target
from modules.simulation.frame_synth import forward_observation
from modules.utils.gradcheck import check_gradient


def grid_calibration(subject, half_deg=10.0, n=3):
    pairs = []
    for v in np.linspace(-half_deg, half_deg, n):
        for h in np.linspace(-half_deg, half_deg, n):
            target = [500.0 * np.tan(np.radians(h)), 500.0 * np.tan(np.radians(v)), 35.0 - 500.0]
            eye = eye_pose_for_target(target, subject)
            pairs.append((eye.optical_axis, calibration_target_axis(target, eye.cornea.center)))
    return CalibrationSet.from_pairs(pairs, subject.subject_id)


def arcmin(a, b):
    return np.degrees(angle_between(a, b)) * 60.0


class TestPupilLifting:

    def test_on_axis_pupil(self, camera):
        np.testing.assert_allclose(lift_pupil_to_3d([320.0, 240.0], [0.0, 0.0, 35.0], camera), [0.0, 0.0, 27.0])

    def test_ray_misses_cornea(self, camera):
        with pytest.raises(NoIntersection):
            lift_pupil_to_3d([0.0, 0.0], [0.0, 0.0, 35.0], camera)

    def test_optical_axis_direction(self):
        axis = optical_axis([0.0, 0.0, 35.0], [0.0, 0.0, 27.0])
        np.testing.assert_allclose(axis.direction, [0.0, 0.0, -1.0])
        np.testing.assert_allclose(axis.anchor, [0.0, 0.0, 35.0])

    def test_coincident_points(self):
        with pytest.raises(CoincidentPoints):
            optical_axis([1.0, 2.0, 30.0], [1.0, 2.0, 30.0])

    def test_exact_chain_recovers_optical_axis(self, subject, camera, rig):
        for eye in random_eyes(subject, 20, seed=31):
            pupil_2d = forward_observation(eye, rig, camera).pupil_2d
            pupil_3d = lift_pupil_to_3d(pupil_2d, eye.cornea.center, camera)
            axis = optical_axis(eye.cornea.center, pupil_3d)
            assert angle_between(axis.direction, eye.optical_axis) < 1e-9

    def test_device_frame_is_identity_by_default(self, camera):
        axis = OpticalAxis([0.0, 0.6, -0.8], [1.0, 2.0, 35.0])
        device = axis.to_device(camera)
        assert isinstance(device, OpticalAxis)
        np.testing.assert_allclose(device.direction, axis.direction)


class TestPolyMapper:

    def test_identity_without_kappa(self, zero_kappa_subject):
        mapper = fit_poly_mapper(grid_calibration(zero_kappa_subject))
        for eye in random_eyes(zero_kappa_subject, 10, seed=32, max_deg=8.0):
            assert angle_between(mapper.map(eye.optical_axis), eye.optical_axis) < 1e-9
        assert mapper.max_residual_arcmin < 1e-6

    def test_generalizes_inside_the_grid(self, subject):
        mapper = fit_poly_mapper(grid_calibration(subject))
        errors = [arcmin(mapper.map(eye.optical_axis), eye.visual_axis)
                  for eye in random_eyes(subject, 20, seed=33, max_deg=8.0)]
        assert np.mean(errors) < 3.0

    def test_too_few_pairs(self, subject):
        calib = grid_calibration(subject)
        with pytest.raises(RankDeficient):
            fit_poly_mapper(CalibrationSet(calib.optical[:5], calib.visual[:5]))

    def test_repeated_pairs_are_rank_deficient(self, subject):
        calib = grid_calibration(subject)
        with pytest.raises(RankDeficient):
            fit_poly_mapper(CalibrationSet(np.repeat(calib.optical[:1], 9, axis=0),
                                           np.repeat(calib.visual[:1], 9, axis=0)))

    def test_residual_invariant_to_roll(self, subject):
        calib = grid_calibration(subject)
        rolled = calib.rotated(Rotation.from_euler('z', 30.0, degrees=True))
        assert fit_poly_mapper(rolled).residual_rms == pytest.approx(fit_poly_mapper(calib).residual_rms, rel=1e-6)

    def test_map_gaze_keeps_anchor(self, subject):
        mapper = fit_poly_mapper(grid_calibration(subject))
        visual = map_gaze(mapper, OpticalAxis([0.0, 0.0, -1.0], [0.0, 0.0, 35.0]))
        np.testing.assert_allclose(visual.anchor, [0.0, 0.0, 35.0])
        assert visual.direction[2] < 0


class TestNetMapper:

    def test_parameter_count(self):
        assert build_net_mapper().parameter_count == 28611

    def test_untrained_network_is_identity(self):
        directions = np.array([[0.0, 0.0, -1.0], [0.1, -0.2, -0.97]])
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        np.testing.assert_allclose(build_net_mapper().map_many(directions), directions, atol=1e-15)

    def test_training_is_deterministic(self, subject):
        calib = grid_calibration(subject)
        config = NetTrainingConfig(iterations=50, seed=3)
        a = fit_net_mapper(calib, config)
        b = fit_net_mapper(calib, config)
        np.testing.assert_array_equal(a.flat_parameters(), b.flat_parameters())

    def test_training_reduces_loss(self, subject):
        mapper = fit_net_mapper(grid_calibration(subject), NetTrainingConfig(iterations=300))
        assert mapper.final_loss < mapper.loss_history[0]

    def test_zero_kappa_stays_close_to_identity(self, zero_kappa_subject):
        mapper = fit_net_mapper(grid_calibration(zero_kappa_subject), NetTrainingConfig(iterations=200))
        for eye in random_eyes(zero_kappa_subject, 10, seed=34, max_deg=8.0):
            assert arcmin(mapper.map(eye.optical_axis), eye.visual_axis) < 5.0

    def test_gradient_matches_finite_differences(self, subject):
        calib = grid_calibration(subject)
        mapper = build_net_mapper(NetTrainingConfig(seed=5))
        rng = np.random.default_rng(5)
        n = mapper.parameter_count
        base = mapper.flat_parameters()
        for _ in range(20):
            flat = base + rng.normal(scale=0.05, size=n)
            indices = sorted(set(rng.choice(n - 20, size=40, replace=False).tolist()) | set(range(n - 20, n)))
            err = check_gradient(lambda p: mapper.loss_at(p, calib), lambda p: mapper.gradient_at(p, calib),
                                 flat, h=1e-5, indices=indices)
            assert err < 1e-4

    def test_too_few_pairs(self, subject):
        calib = grid_calibration(subject)
        with pytest.raises(RankDeficient):
            fit_net_mapper(CalibrationSet(calib.optical[:8], calib.visual[:8]))

    def test_divergence_is_reported(self, subject):
        calib = grid_calibration(subject)
        calib.optical[0] = np.nan
        with pytest.raises(NonFiniteLoss):
            fit_net_mapper(calib, NetTrainingConfig(iterations=5))

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            NetTrainingConfig(activation='sigmoid')
        with pytest.raises(ValueError):
            NetTrainingConfig(optimizer='lbfgs')


class TestMapperFiles:

    def test_poly_reload_is_exact(self, subject, tmp_path):
        mapper = fit_poly_mapper(grid_calibration(subject))
        save_mapper(tmp_path / "poly.json", mapper, subject_id=0, config_hash="abc")
        loaded = load_mapper(tmp_path / "poly.json")
        assert isinstance(loaded, PolyMapper)
        directions = grid_calibration(subject, half_deg=6.0).optical
        np.testing.assert_array_equal(loaded.map_many(directions), mapper.map_many(directions))

    def test_network_reload_is_exact(self, subject, tmp_path):
        mapper = fit_net_mapper(grid_calibration(subject), NetTrainingConfig(iterations=20))
        save_mapper(tmp_path / "net.json", mapper)
        loaded = load_mapper(tmp_path / "net.json")
        assert loaded.kind == "network"
        directions = grid_calibration(subject, half_deg=6.0).optical
        np.testing.assert_array_equal(loaded.map_many(directions), mapper.map_many(directions))

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "other", "schema_version": 1}))
        with pytest.raises(DatasetFormatError):
            load_mapper(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetFormatError):
            load_mapper(tmp_path / "absent.json")
