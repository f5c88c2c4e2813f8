import numpy as np
import pytest

from conftest import random_eyes
from modules.core.errors import (BehindCamera, DegenerateSystem, InsufficientConstraints, NoIntersection,
                                 NonPositiveDepth, OffSurface)
from modules.cornea.ray_solver import cornea_ray_from_glints, cornea_ray_from_labeled
from modules.geometry.camera import PinholeCamera, back_project, back_project_many, project
from modules.geometry.null_ray import solve_null_ray
from modules.geometry.primitives import ORIGIN, Ray3, Sphere, angle_between, normalize
from modules.geometry.reflection import (point_to_ray_distance, ray_sphere_near_intersection,
                                         reflect_about_normal, surface_normal)
from modules.simulation.frame_synth import forward_observation
from modules.simulation.glint_reflection import solve_glint_reflection
from modules.simulation.led_rig import LedRig


class TestCamera:

    def test_principal_point_on_axis(self, camera):
        np.testing.assert_allclose(project(camera, [0.0, 0.0, 10.0]), [320.0, 240.0])

    def test_focal_scaling(self, camera):
        np.testing.assert_allclose(project(camera, [1.0, 0.0, 10.0]), [380.0, 240.0])

    def test_zero_depth_rejected(self, camera):
        with pytest.raises(NonPositiveDepth):
            project(camera, [1.0, 1.0, 0.0])

    def test_back_project_principal_point(self, camera):
        np.testing.assert_allclose(back_project(camera, [320.0, 240.0]), [0.0, 0.0, 1.0])

    def test_round_trip_on_directions(self, camera):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = rng.uniform([-50, -50, 5], [50, 50, 500])
            d = back_project(camera, project(camera, p))
            assert angle_between(d, normalize(p)) < 1e-9

    def test_vectorized_back_projection_matches(self, camera):
        pixels = np.array([[0.0, 0.0], [100.5, 33.25], [639.0, 479.0]])
        many = back_project_many(camera, pixels)
        for row, q in zip(many, pixels):
            np.testing.assert_allclose(row, back_project(camera, q), atol=1e-15)

    def test_invalid_camera(self):
        with pytest.raises(ValueError):
            PinholeCamera(focal_px=0.0)
        with pytest.raises(ValueError):
            PinholeCamera(principal_point=(700.0, 10.0))

    def test_from_config_defaults_to_image_center(self, config):
        cam = PinholeCamera.from_config(config)
        assert cam.principal_point == (320.0, 240.0)
        assert cam.focal_px == 600.0


class TestRaySphere:

    def test_on_axis_hit(self):
        hit = ray_sphere_near_intersection(Ray3(ORIGIN, [0.0, 0.0, 1.0]), Sphere([0.0, 0.0, 35.0], 8.0))
        np.testing.assert_allclose(hit, [0.0, 0.0, 27.0])

    def test_miss(self):
        with pytest.raises(NoIntersection):
            ray_sphere_near_intersection(Ray3(ORIGIN, [1.0, 0.0, 0.0]), Sphere([0.0, 0.0, 35.0], 8.0))

    def test_sphere_behind(self):
        with pytest.raises(BehindCamera):
            ray_sphere_near_intersection(Ray3(ORIGIN, [0.0, 0.0, 1.0]), Sphere([0.0, 0.0, -35.0], 8.0))

    def test_origin_inside_returns_far_root(self):
        hit = ray_sphere_near_intersection(Ray3(ORIGIN, [0.0, 0.0, 1.0]), Sphere([0.0, 0.0, 1.0], 8.0))
        np.testing.assert_allclose(hit, [0.0, 0.0, 9.0])

    def test_ray_requires_unit_direction(self):
        with pytest.raises(ValueError):
            Ray3(ORIGIN, [0.0, 0.0, 2.0])

    def test_sphere_requires_positive_radius(self):
        with pytest.raises(ValueError):
            Sphere(ORIGIN, 0.0)


class TestReflection:

    def test_mirror_about_normal(self):
        np.testing.assert_allclose(reflect_about_normal([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), [-1.0, 0.0, 0.0])

    def test_along_normal_is_fixed(self):
        n = normalize([1.0, 2.0, -2.0])
        np.testing.assert_allclose(reflect_about_normal(n, n), n)

    def test_reflection_preserves_angle_to_normal(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g, n = normalize(rng.normal(size=3)), normalize(rng.normal(size=3))
            r = reflect_about_normal(g, n)
            assert abs(np.dot(r, n) - np.dot(g, n)) < 1e-12

    def test_surface_normal_points_inward(self):
        sphere = Sphere([0.0, 0.0, 35.0], 8.0)
        np.testing.assert_allclose(surface_normal(sphere, [0.0, 0.0, 27.0]), [0.0, 0.0, 1.0])

    def test_surface_normal_off_surface(self):
        with pytest.raises(OffSurface):
            surface_normal(Sphere([0.0, 0.0, 35.0], 8.0), [0.0, 0.0, 26.0])

    def test_point_to_line_distance(self):
        assert point_to_ray_distance([0.0, 1.0, 0.0], ORIGIN, [1.0, 0.0, 0.0]) == pytest.approx(1.0)

    def test_half_line_clamps_to_origin(self):
        led = [-5.0, 1.0, 0.0]
        assert point_to_ray_distance(led, ORIGIN, [1.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert point_to_ray_distance(led, ORIGIN, [1.0, 0.0, 0.0], half_line=True) == pytest.approx(np.sqrt(26.0))


class TestNullRay:

    def test_two_planes_through_z_axis(self):
        np.testing.assert_allclose(solve_null_ray([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), [0.0, 0.0, 1.0], atol=1e-15)

    def test_orientation_into_scene(self):
        v = solve_null_ray([[1.0, 0.0, 0.1], [0.0, 1.0, -0.2], [1.0, 1.0, -0.1]])
        assert v[2] > 0

    def test_single_normal(self):
        with pytest.raises(InsufficientConstraints):
            solve_null_ray([[1.0, 0.0, 0.0]])

    def test_parallel_normals(self):
        with pytest.raises(DegenerateSystem):
            solve_null_ray([[0.0, 1.0, 0.0], [0.0, -2.0, 0.0]])


class TestCorneaRay:

    def _labeled(self, rig, camera, cornea):
        return [(label, project(camera, solve_glint_reflection(rig.position(label), cornea))) for label in rig.labels]

    def test_symmetric_cross_rig_gives_optical_axis(self, cross_rig, camera):
        ray = cornea_ray_from_labeled(self._labeled(cross_rig, camera, Sphere([0.0, 0.0, 35.0], 8.0)),
                                      cross_rig, camera)
        np.testing.assert_allclose(ray.direction, [0.0, 0.0, 1.0], atol=1e-9)

    def test_two_collinear_leds_are_degenerate(self, camera):
        rig = LedRig(np.array([[20.0, 0.0, 0.0], [-20.0, 0.0, 0.0]]))
        with pytest.raises(DegenerateSystem):
            cornea_ray_from_labeled(self._labeled(rig, camera, Sphere([0.0, 0.0, 35.0], 8.0)), rig, camera)

    def test_ray_passes_through_true_cornea(self, subject, rig, camera):
        for eye in random_eyes(subject, 200, seed=11):
            ray = cornea_ray_from_glints(forward_observation(eye, rig, camera), rig, camera)
            c = eye.cornea.center
            assert np.linalg.norm(c - np.dot(c, ray.direction) * ray.direction) < 1e-7
