"""Tests for discrete Legendre transforms and the two envelope backends."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from src.envelope import (
    DirectConcaveMax,
    GridBiconjugate,
    GridFunction,
    MinimumOfPieces,
    agreement_tolerance,
    backend_from_dict,
    biconjugate,
    convex_envelope_eval,
    default_grid_resolution,
    discrete_legendre,
    legendre_1d,
    lower_envelope_1d,
)
from src.errors import BackendDisagreementError, InputError, NumericalError
from src.geometry import NormSpace, parallel_map
from src.modulus import ModulusCalculus, PowerModulus


@st.composite
def sampled_functions(draw):
    """Strictly increasing abscissae with arbitrary values."""
    n = draw(st.integers(min_value=2, max_value=15))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    xs = np.cumsum(rng.uniform(0.1, 1.0, n))
    fs = rng.uniform(-3.0, 3.0, n)
    return xs, fs


def brute_force_envelope(xs, fs):
    """Lowest chord value at every sample: min over j <= i <= k."""
    n = len(xs)
    out = fs.copy()
    for i in range(n):
        for j in range(i + 1):
            for k in range(i, n):
                if j == k:
                    continue
                t = (xs[i] - xs[j]) / (xs[k] - xs[j])
                out[i] = min(out[i], (1.0 - t) * fs[j] + t * fs[k])
    return out


def quadratic_pieces(centers, slopes, values, scale=2.0):
    """min_i v_i + a_i (x - y_i) + scale * ||x - y_i||^2 / 2."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return MinimumOfPieces(
        centers=centers,
        slopes=slopes,
        values=values,
        kernel=ModulusCalculus(PowerModulus(K=1.0, alpha=1.0)),
        scale=scale,
        space=NormSpace.euclidean(centers.shape[1]),
    )


@pytest.fixture
def parabola():
    """1 + x + x^2 as a single piece."""
    return quadratic_pieces([[0.0]], [[1.0]], [1.0])


@pytest.fixture
def double_well():
    """min((x + 1)^2, (x - 1)^2); its envelope is flat on [-1, 1]."""
    return quadratic_pieces([[-1.0], [1.0]], [[0.0], [0.0]], [0.0, 0.0])


class TestOneDimensional:
    """Lower hulls and 1D transforms against brute force."""

    @settings(max_examples=80, deadline=None)
    @given(sampled_functions())
    def test_lower_envelope(self, data):
        xs, fs = data
        assert lower_envelope_1d(xs, fs, xs) == pytest.approx(brute_force_envelope(xs, fs), abs=1e-9)

    @settings(max_examples=80, deadline=None)
    @given(sampled_functions(), st.floats(min_value=-20.0, max_value=20.0))
    def test_legendre(self, data, s):
        xs, fs = data
        expected = float(np.max(s * xs - fs))
        assert legendre_1d(xs, fs, np.array([s]))[0] == pytest.approx(expected, abs=1e-9)

    def test_single_point_transform(self):
        out = legendre_1d(np.array([2.0]), np.array([1.0]), np.array([0.0, 1.5]))
        assert out == pytest.approx([-1.0, 2.0])


class TestGridTransforms:
    """Factorized discrete transforms on lattices."""

    def test_biconjugate_of_convex_function(self):
        f = GridFunction.from_function(lambda X: X[:, 0] ** 2, [-1.0], [1.0], (101,))
        assert biconjugate(f).values == pytest.approx(f.values, abs=1e-3)

    def test_biconjugate_of_separable_function(self):
        f = GridFunction.from_function(lambda X: X[:, 0] ** 2 + 2.0 * X[:, 1] ** 2,
                                       [-1.0, -1.0], [1.0, 1.0], (41, 41))
        assert biconjugate(f).values == pytest.approx(f.values, abs=1e-3)

    def test_biconjugate_of_double_well(self):
        f = GridFunction.from_function(lambda X: (X[:, 0] ** 2 - 1.0) ** 2, [-1.5], [1.5], (201,))
        xs = f.axes()[0]
        expected = lower_envelope_1d(xs, f.values, xs)
        env = biconjugate(f).values
        assert env == pytest.approx(expected, abs=1e-6)
        assert np.all(env <= f.values + 1e-12)

    def test_conjugate_of_quadratic(self):
        # (x^2 / 2)* = xi^2 / 2 while the maximizer stays inside the box
        f = GridFunction.from_function(lambda X: 0.5 * X[:, 0] ** 2, [-2.0], [2.0], (401,))
        conj = discrete_legendre(f, [-1.0], [1.0], (21,))
        xi = conj.axes()[0]
        assert conj.values == pytest.approx(0.5 * xi ** 2, abs=1e-4)

    def test_dump_and_load(self, tmp_path):
        f = GridFunction.from_function(lambda X: np.sin(X[:, 0]) * X[:, 1], [0.0, -1.0], [1.0, 2.0], (5, 7))
        f.dump(tmp_path / "grid.txt")
        again = GridFunction.load(tmp_path / "grid.txt")
        assert again.resolution == (5, 7)
        assert np.array_equal(again.values, f.values)
        assert np.array_equal(again.low, f.low)

    def test_grid_validation(self):
        with pytest.raises(InputError):
            GridFunction([0.0], [1.0], np.zeros(1))
        with pytest.raises(InputError):
            GridFunction([1.0], [0.0], np.zeros(3))


class TestMinimumOfPieces:
    """Piecewise minimum and its closed-form conjugate."""

    def test_values(self, double_well):
        assert double_well(np.array([0.0])) == pytest.approx(1.0)
        assert double_well(np.array([[2.0], [-0.5]])) == pytest.approx([1.0, 0.25])
        assert double_well.argmin_piece([0.7]) == 1

    def test_conjugate_against_sampling(self, double_well):
        xs = np.linspace(-10.0, 10.0, 200001)[:, np.newaxis]
        gx = double_well(xs)
        for xi in (-1.5, 0.0, 2.0):
            assert double_well.conjugate([xi]) == pytest.approx(float(np.max(xi * xs[:, 0] - gx)), abs=1e-6)

    def test_conjugate_jacobian(self):
        g = quadratic_pieces([[0.0, 0.0], [1.0, 0.5]], [[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], scale=3.0)
        xi = np.array([0.4, -0.7])
        jac = g.conjugate_jacobian(xi)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (g.conjugate_terms(xi + e) - g.conjugate_terms(xi - e)) / (2.0 * h)
            assert jac[:, k] == pytest.approx(fd, abs=1e-6)

    def test_scale_must_be_positive(self):
        with pytest.raises(InputError):
            quadratic_pieces([[0.0]], [[1.0]], [1.0], scale=0.0)


class TestDirectBackend:
    """Concave maximization per query."""

    @pytest.mark.parametrize("x", [-1.0, 0.0, 0.3, 2.5])
    def test_convex_input_is_unchanged(self, parabola, x):
        value, gradient = DirectConcaveMax().maximizer(parabola, np.array([x]))
        assert value == pytest.approx(1.0 + x + x * x, abs=1e-8)
        assert gradient == pytest.approx([1.0 + 2.0 * x], abs=1e-5)

    @pytest.mark.parametrize("x, expected", [(0.0, 0.0), (0.5, 0.0), (-0.9, 0.0), (2.0, 1.0), (-3.0, 4.0)])
    def test_double_well(self, double_well, x, expected):
        assert DirectConcaveMax().evaluate(double_well, np.array([x])) == pytest.approx(expected, abs=1e-8)

    def test_gradient_on_flat_part(self, double_well):
        assert DirectConcaveMax().gradient(double_well, np.array([0.2])) == pytest.approx([0.0], abs=1e-5)

    def test_dimension_cap(self):
        g = quadratic_pieces(np.zeros((1, 9)), np.eye(9)[:1], [1.0])
        with pytest.raises(InputError):
            DirectConcaveMax().evaluate(g, np.zeros(9))

    def test_threaded_queries_match_sequential(self, double_well):
        backend = DirectConcaveMax()
        xs = [np.array([x]) for x in np.linspace(-3.0, 3.0, 13)]
        sequential = [backend.evaluate(double_well, x) for x in xs]
        assert parallel_map(lambda x: backend.evaluate(double_well, x), xs, threads=4) == sequential

    def test_failed_solver_restarts(self, parabola, monkeypatch, caplog):
        real = optimize.minimize
        calls = []

        def flaky(fun, x0, **kwargs):
            calls.append(x0)
            if len(calls) == 1:
                return optimize.OptimizeResult(x=np.asarray(x0), status=4, message="Inequality constraints incompatible")
            return real(fun, x0, **kwargs)

        monkeypatch.setattr(optimize, "minimize", flaky)
        with caplog.at_level("WARNING", logger="src.envelope"):
            value = DirectConcaveMax().evaluate(parabola, np.array([0.5]))
        assert value == pytest.approx(1.75, abs=1e-8)
        assert len(calls) == 2
        assert "restarting" in caplog.text

    def test_solver_failing_twice_raises(self, parabola, monkeypatch):
        def broken(fun, x0, **kwargs):
            return optimize.OptimizeResult(x=np.asarray(x0), status=6, message="Singular matrix C in LSQ subproblem")

        monkeypatch.setattr(optimize, "minimize", broken)
        with pytest.raises(NumericalError, match="failed twice"):
            DirectConcaveMax().evaluate(parabola, np.array([0.5]))


class TestGridBackend:
    """Biconjugate on a box lattice."""

    def test_double_well(self, double_well):
        grid = GridBiconjugate([-3.0], [3.0], 601)
        assert grid.evaluate(double_well, [0.0]) == pytest.approx(0.0, abs=1e-6)
        assert grid.evaluate(double_well, [2.0]) == pytest.approx(1.0, abs=1e-3)
        assert grid.gradient(double_well, np.array([2.0])) == pytest.approx([2.0], abs=5e-2)

    def test_prepared_once(self, double_well):
        grid = GridBiconjugate([-3.0], [3.0], 101)
        first = grid.prepare(double_well)
        assert grid.prepare(double_well) is first

    def test_dimension_cap(self):
        with pytest.raises(InputError):
            GridBiconjugate(np.zeros(4), np.ones(4), 5)


class TestCrossCheck:
    """convex_envelope_eval with a second backend."""

    def test_agreement(self, double_well):
        grid = GridBiconjugate([-3.0], [3.0], 601)
        value = convex_envelope_eval(double_well, np.array([2.0]), DirectConcaveMax(), check=grid)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_disagreement_raises(self, double_well):
        coarse = GridBiconjugate([-3.0], [3.0], 3)
        with pytest.raises(BackendDisagreementError) as info:
            convex_envelope_eval(double_well, np.array([2.0]), DirectConcaveMax(), check=coarse, tolerance=1e-6)
        assert info.value.exit_code == 3
        assert info.value.first == pytest.approx(1.0, abs=1e-8)

    def test_agreement_tolerance_floor(self, double_well):
        fine = GridBiconjugate([-1e-6], [1e-6], 3)
        assert agreement_tolerance(double_well, fine) == 1e-4


class TestBackendConfig:
    """Serialized backend descriptions."""

    def test_from_dict(self):
        direct = backend_from_dict(DirectConcaveMax(tol=1e-9, max_iter=50).to_dict())
        assert isinstance(direct, DirectConcaveMax)
        assert direct.max_iter == 50
        grid = backend_from_dict(GridBiconjugate([-1.0, -2.0], [1.0, 2.0], 33).to_dict())
        assert isinstance(grid, GridBiconjugate)
        assert grid.resolution == 33
        with pytest.raises(InputError):
            backend_from_dict({"kind": "simplex"})

    def test_default_resolution(self):
        assert default_grid_resolution(1) == 513
        assert default_grid_resolution(2) == 513
        assert default_grid_resolution(3) == 65
