"""Tests for the rolled-ball C^{1,1} body."""

import math

import numpy as np
import pytest

from src.body_c11 import BodyC11, build_c11
from src.errors import InfeasibleError, InputError, RegionError
from src.fixtures import gen_lp_sphere_data, gen_opposing_normals, gen_sphere_data
from src.geometry import Polytope


class TestConstruction:
    """build_c11 on feasible and infeasible data."""

    def test_circle_centers_collapse(self, circle_body):
        assert np.abs(circle_body.centers.vertices).max() <= 1e-15
        assert circle_body.radius == 1.0

    def test_interpolates_data(self, stadium_problem, stadium_body):
        for y, n in zip(stadium_problem.points, stadium_problem.normals):
            assert abs(stadium_body.signed_distance(y)) <= 1e-9
            assert stadium_body.boundary_normal(y) == pytest.approx(n, abs=1e-9)

    def test_smaller_radius_still_interpolates(self):
        problem = gen_sphere_data(12)
        body = build_c11(problem, 0.4)
        assert max(abs(body.signed_distance(y)) for y in problem.points) <= 1e-9

    def test_infeasible_radius(self, circle_problem):
        with pytest.raises(InfeasibleError) as info:
            build_c11(circle_problem, 1.5)
        assert info.value.pair is not None
        assert info.value.exit_code == 2

    def test_opposing_pair_is_named(self):
        with pytest.raises(InfeasibleError) as info:
            build_c11(gen_opposing_normals(), 0.5)
        assert info.value.pair == (0, 1)

    def test_non_euclidean(self):
        with pytest.raises(InputError):
            build_c11(gen_lp_sphere_data(8, 3.0), 0.1)

    def test_radius_must_be_positive(self):
        with pytest.raises(InputError):
            BodyC11(centers=Polytope(np.zeros((1, 2))), radius=0.0)


class TestDistanceQueries:
    """Signed distance and its gradient on the unit disc."""

    @pytest.mark.parametrize("x", [[0.0, 0.0], [0.3, -0.2], [2.0, 1.0], [-5.0, 0.5]])
    def test_signed_distance(self, circle_body, x):
        assert circle_body.signed_distance(x) == pytest.approx(np.linalg.norm(x) - 1.0, abs=1e-9)

    def test_contains_and_inradius(self, circle_body):
        assert circle_body.contains([0.5, 0.5])
        assert not circle_body.contains([1.0, 1.0])
        assert circle_body.inradius_at([0.0, 0.0]) == pytest.approx(1.0)
        assert circle_body.inradius_at([3.0, 0.0]) == 0.0

    def test_distance_gradient(self, circle_body):
        assert circle_body.distance_gradient([3.0, 4.0]) == pytest.approx([0.6, 0.8])
        with pytest.raises(RegionError):
            circle_body.distance_gradient([0.0, 0.0])

    def test_stadium_distances(self, stadium_body):
        assert stadium_body.signed_distance([0.0, 2.0]) == pytest.approx(1.0, abs=1e-9)
        assert stadium_body.signed_distance([3.0, 0.0]) == pytest.approx(1.0, abs=1e-9)
        assert stadium_body.signed_distance([0.0, 0.0]) == pytest.approx(-1.0, abs=1e-9)
        assert stadium_body.inradius_at(stadium_body.interior_point()) == pytest.approx(1.0, abs=1e-9)


class TestBoundary:
    """Projection, normals and ray casting."""

    def test_project_boundary(self, circle_body):
        assert circle_body.project_boundary([3.0, 4.0]) == pytest.approx([0.6, 0.8])
        assert circle_body.project_boundary([0.3, 0.4]) == pytest.approx([0.6, 0.8])
        with pytest.raises(RegionError):
            circle_body.project_boundary([0.0, 0.0])

    def test_boundary_normal_off_boundary(self, circle_body):
        with pytest.raises(RegionError):
            circle_body.boundary_normal([2.0, 0.0])

    def test_ray_boundary(self, circle_body):
        assert circle_body.ray_boundary([0.0, 0.0], [1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
        assert circle_body.ray_boundary([0.5, 0.0], [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)
        with pytest.raises(RegionError):
            circle_body.ray_boundary([2.0, 0.0], [1.0, 0.0])

    def test_ray_leaving_clip_box(self, stadium_body):
        box = (np.array([-4.0, -0.5]), np.array([4.0, 0.5]))
        assert stadium_body.ray_boundary([0.0, 0.0], [0.0, 1.0], box) is None
        assert stadium_body.ray_boundary([0.0, 0.0], [1.0, 0.0], box) == pytest.approx(2.0, abs=1e-12)


class TestGauge:
    """Minkowski gauge from an interior origin."""

    @pytest.mark.parametrize("x", [[0.5, 0.0], [1.0, 1.0], [-0.2, 3.0]])
    def test_gauge_is_norm(self, circle_body, x):
        assert circle_body.gauge(x, [0.0, 0.0]) == pytest.approx(np.linalg.norm(x), rel=1e-10)

    def test_gauge_gradient(self, circle_body):
        x = np.array([1.2, -0.9])
        assert circle_body.gauge_gradient(x, [0.0, 0.0]) == pytest.approx(x / np.linalg.norm(x), rel=1e-9)

    def test_gauge_at_origin(self, circle_body):
        assert circle_body.gauge([0.0, 0.0], [0.0, 0.0]) == 0.0
        with pytest.raises(RegionError):
            circle_body.gauge_gradient([0.0, 0.0], [0.0, 0.0])

    def test_origin_must_be_interior(self, circle_body):
        with pytest.raises(InputError):
            circle_body.gauge([0.5, 0.0], [1.0, 0.0])


class TestSampling:
    """Deterministic ray-cast samples."""

    def test_samples_on_boundary(self, stadium_body):
        samples = stadium_body.sample_boundary(32, seed=3)
        assert len(samples) == 32
        assert max(abs(stadium_body.signed_distance(s)) for s in samples) <= 1e-9

    def test_same_seed_same_samples(self, stadium_body):
        first = np.array(stadium_body.sample_boundary(16, seed=5))
        second = np.array(stadium_body.sample_boundary(16, seed=5))
        assert np.array_equal(first, second)

    def test_clip_box_drops_rays(self, stadium_body):
        box = (np.array([-4.0, -0.5]), np.array([4.0, 0.5]))
        samples = stadium_body.sample_boundary(64, seed=1, clip_box=box)
        assert 0 < len(samples) < 64
        for s in samples:
            assert np.all(np.abs(s) <= [4.0 + 1e-9, 0.5 + 1e-9])

    def test_sphere_in_three_dimensions(self):
        body = build_c11(gen_sphere_data(40, dimension=3), 1.0)
        samples = body.sample_boundary(20, seed=0)
        norms = np.linalg.norm(np.array(samples), axis=1)
        assert norms == pytest.approx(np.ones(20), abs=1e-9)
        assert math.isclose(body.inradius_at(np.zeros(3)), 1.0, abs_tol=1e-9)
