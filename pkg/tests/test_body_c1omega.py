"""Tests for the sublevel-set C^{1,omega} and C^{1,alpha} bodies."""

import math

import numpy as np
import pytest

from src.body_c1omega import DualAlpha, HilbertOmega, build_c1alpha, build_c1omega
from src.envelope import GridBiconjugate
from src.errors import DomainError, InfeasibleError, InputError, RegionError
from src.feasibility import max_c1alpha_delta
from src.fixtures import gen_lp_sphere_data, gen_sphere_data
from src.modulus import ModulusCalculus, TabulatedModulus


class TestSingleDatum:
    """One datum on the line: g(x) = 1 + x + x^2, z = -1/2."""

    def test_constants(self, single_datum_body, lipschitz_modulus):
        body = single_datum_body
        assert body.inner_offset == pytest.approx(0.5)
        assert body.z_points == pytest.approx(np.array([[-0.5]]))
        assert body.distance_weight == pytest.approx(0.25)
        assert body.inf_value == pytest.approx(0.75)
        assert body.inf_value == pytest.approx(1.0 - 2.0 * lipschitz_modulus.phi_conjugate(0.5))
        assert body.reach == pytest.approx(math.sqrt(2.0) + 0.5)

    def test_values(self, single_datum_body):
        body = single_datum_body
        assert body.eval_g([0.3]) == pytest.approx(1.39)
        assert body.eval_H([0.3]) == pytest.approx(1.39, abs=1e-8)
        assert body.eval_F([0.0]) == pytest.approx(1.0, abs=1e-9)
        assert body.eval_F([-0.5]) == pytest.approx(0.75, abs=1e-9)
        # Outside A the distance term adds (1/4) * d^2 / 2
        assert body.eval_F([0.4]) == pytest.approx(1.0 + 0.4 + 0.16 + 0.02, abs=1e-8)

    def test_gradients(self, single_datum_body):
        assert single_datum_body.grad_F([0.0]) == pytest.approx([1.0], abs=1e-5)
        assert single_datum_body.grad_F([-0.5]) == pytest.approx([0.0], abs=1e-5)

    def test_level_set(self, single_datum_body):
        samples = single_datum_body.boundary_sample(6, seed=2)
        # Roots of F = 1 are 0 and the negative root of 9x^2 + 9x + 1/4 = 0
        left = (-9.0 - math.sqrt(81.0 - 9.0)) / 18.0
        for s in samples:
            assert min(abs(s[0]), abs(s[0] - left)) <= 1e-9

    def test_level_set_bounds(self, single_datum_body):
        report = single_datum_body.level_set_bounds_check(4, seed=0)
        assert report.passed
        assert report.minimum_value == pytest.approx(0.75, abs=1e-6)
        assert report.lower_bound == pytest.approx(0.25 / (math.sqrt(2.0) + 0.5))
        assert report.min_gradient >= report.lower_bound

    def test_level_set_bounds_on_the_circle(self, circle_c1omega):
        report = circle_c1omega.level_set_bounds_check(6, seed=1)
        assert report.passed
        assert report.samples == 6
        assert report.minimum_value == pytest.approx(0.875, abs=1e-6)
        assert report.lower_bound == pytest.approx((1.0 - 0.875) / circle_c1omega.reach)
        assert report.min_gradient >= report.lower_bound
        assert report.max_gradient <= report.upper_bound * (1.0 + 1e-9)
        assert report.fitted_L > 0.0

    def test_level_set_bounds_reject_flattened_gradients(self, circle_c1omega, monkeypatch):
        original = circle_c1omega.value_and_gradient

        def flattened(x):
            value, grad = original(x)
            return value, 1e-3 * grad

        monkeypatch.setattr(circle_c1omega, "value_and_gradient", flattened)
        report = circle_c1omega.level_set_bounds_check(6, seed=1)
        assert not report.passed
        assert len(report.witnesses) == 6

    def test_level_set_bounds_reject_wrong_minimizers(self, circle_c1omega, monkeypatch):
        monkeypatch.setattr(circle_c1omega, "z_points", 1.2 * circle_c1omega.z_points)
        assert not circle_c1omega.level_set_bounds_check(4, seed=1).passed

    def test_region(self, single_datum_body):
        with pytest.raises(RegionError):
            single_datum_body.eval_F([50.0])
        with pytest.raises(InputError):
            single_datum_body.eval_F([0.0, 0.0])


class TestCircle:
    """Unit circle with omega(t) = t at delta = 1/4."""

    def test_interpolation(self, circle_problem, circle_c1omega):
        for y, n in zip(circle_problem.points[::3], circle_problem.normals[::3]):
            value, grad = circle_c1omega.value_and_gradient(y)
            assert value == pytest.approx(1.0, abs=1e-6)
            assert grad == pytest.approx(n, abs=1e-4)

    def test_minimum_at_inner_points(self, circle_c1omega):
        assert circle_c1omega.inf_value == pytest.approx(0.875)
        z = circle_c1omega.z_points[0]
        assert np.linalg.norm(z) == pytest.approx(0.75)
        assert circle_c1omega.eval_F(z) == pytest.approx(0.875, abs=1e-6)

    def test_contains(self, circle_c1omega):
        assert circle_c1omega.contains([0.0, 0.0])
        assert not circle_c1omega.contains([1.3, 0.0])

    def test_boundary_normal(self, circle_c1omega):
        s = circle_c1omega.boundary_sample(1, seed=4)[0]
        n = circle_c1omega.boundary_normal(s)
        assert np.linalg.norm(n) == pytest.approx(1.0)
        # The outer normal points away from the interior
        assert n @ (s - circle_c1omega.interior_point()) > 0

    def test_envelope_agreement(self, circle_c1omega):
        worst = circle_c1omega.envelope_agreement(8, seed=1, resolution=129)
        grid = circle_c1omega.grid_backend(129)
        assert isinstance(grid, GridBiconjugate)
        assert worst >= 0.0

    def test_clip_box_outside_region(self, circle_c1omega):
        far = (np.array([20.0, 20.0]), np.array([21.0, 21.0]))
        with pytest.raises(RegionError):
            circle_c1omega.ray_boundary([0.0, 0.0], [1.0, 0.0], far)

    def test_sampling_is_deterministic(self, circle_c1omega):
        first = np.array(circle_c1omega.boundary_sample(4, seed=9))
        second = np.array(circle_c1omega.boundary_sample(4, seed=9))
        assert np.array_equal(first, second)

    def test_infeasible_delta(self, circle_problem, lipschitz_modulus):
        with pytest.raises(InfeasibleError):
            build_c1omega(circle_problem, lipschitz_modulus, 0.6)

    def test_tabulated_modulus(self):
        problem = gen_sphere_data(6)
        modulus = ModulusCalculus(TabulatedModulus(table=((1.0, 1.0), (2.0, 1.5), (4.0, 2.0))))
        body = build_c1omega(problem, modulus, 0.25)
        assert body.eval_F(problem.points[0]) == pytest.approx(1.0, abs=1e-6)
        assert body.inf_value == pytest.approx(1.0 - modulus.phi_conjugate(0.25) / 0.25)


class TestDualAlpha:
    """C^{1,alpha} bodies under l_p norms."""

    @pytest.fixture
    def lp_problem(self):
        return gen_lp_sphere_data(12, 1.5)

    @pytest.fixture
    def lp_body(self, lp_problem):
        delta = 0.5 * max_c1alpha_delta(lp_problem, 0.5)
        return build_c1alpha(lp_problem, 0.5, delta)

    def test_variant_constants(self):
        variant = DualAlpha.from_delta(0.5, 0.25)
        # delta = alpha / ((1 + alpha) M^(1/alpha))
        assert 0.5 / (1.5 * variant.M ** 2.0) == pytest.approx(0.25)
        assert HilbertOmega().kind == "c1omega"

    def test_interpolation(self, lp_problem, lp_body):
        for y in lp_problem.points[::4]:
            assert lp_body.eval_F(y) == pytest.approx(1.0, abs=1e-6)

    def test_minimum(self, lp_body):
        assert lp_body.inf_value == pytest.approx(1.0 - lp_body.delta)
        assert lp_body.eval_F(lp_body.z_points[0]) == pytest.approx(lp_body.inf_value, abs=1e-6)

    def test_norm_not_smooth_enough(self):
        with pytest.raises(DomainError):
            build_c1alpha(gen_lp_sphere_data(12, 1.25), 0.5, 0.01)

    def test_omega_variant_needs_euclidean(self, lp_problem, lipschitz_modulus):
        with pytest.raises(InputError):
            build_c1omega(lp_problem, lipschitz_modulus, 0.1)
