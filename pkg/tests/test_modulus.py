"""Tests for moduli of continuity and their derived functions."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import DomainError, InputError
from src.modulus import ModulusCalculus, PowerModulus, TabulatedModulus, modulus_from_dict

POWER_GRID = [(K, alpha) for K in (0.5, 1.0, 2.0) for alpha in (0.25, 0.5, 1.0)]

# Concave, slopes 1, 1/2, 1/4
TABLE = ((1.0, 1.0), (2.0, 1.5), (4.0, 2.0))


def calculators():
    moduli = [ModulusCalculus(PowerModulus(K=K, alpha=a)) for K, a in POWER_GRID]
    moduli.append(ModulusCalculus(TabulatedModulus(table=TABLE)))
    return moduli


@st.composite
def positive_reals(draw, low=1e-3, high=20.0):
    return draw(st.floats(min_value=low, max_value=high, allow_nan=False, allow_infinity=False))


class TestValidation:
    """Raising constructors and (ok, error) validators."""

    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5])
    def test_power_alpha_range(self, alpha):
        with pytest.raises(InputError):
            PowerModulus(K=1.0, alpha=alpha)

    def test_power_K_positive(self):
        with pytest.raises(InputError):
            PowerModulus(K=0.0, alpha=0.5)

    def test_non_concave_table(self):
        with pytest.raises(InputError, match="concave"):
            TabulatedModulus(table=((1.0, 1.0), (2.0, 3.0)))

    def test_non_increasing_table(self):
        with pytest.raises(InputError):
            TabulatedModulus(table=((1.0, 1.0), (2.0, 1.0)))

    def test_table_gets_origin(self):
        t, w = TabulatedModulus(table=TABLE).arrays()
        assert t[0] == 0.0 and w[0] == 0.0

    def test_from_dict(self):
        m = modulus_from_dict({"kind": "power", "K": 2.0, "alpha": 0.5})
        assert m == PowerModulus(K=2.0, alpha=0.5)
        tab = modulus_from_dict({"kind": "tabulated", "table": [list(r) for r in TABLE]})
        assert tab.to_dict()["table"] == [list(r) for r in TABLE]
        with pytest.raises(InputError):
            modulus_from_dict({"kind": "spline"})

    def test_negative_argument(self):
        calc = ModulusCalculus(PowerModulus())
        with pytest.raises(DomainError):
            calc.phi(-1.0)
        with pytest.raises(DomainError):
            calc.omega_inverse(np.array([1.0, -0.1]))


class TestClosedForms:
    """Power-type formulas and scalar/array handling."""

    def test_power_values(self):
        calc = ModulusCalculus(PowerModulus(K=2.0, alpha=0.5))
        assert calc.omega(4.0) == pytest.approx(4.0)
        assert calc.omega_inverse(4.0) == pytest.approx(4.0)
        assert calc.phi(4.0) == pytest.approx(2.0 * 4.0 ** 1.5 / 1.5)
        assert calc.phi_conjugate(2.0) == pytest.approx((0.5 / 1.5) * 2.0 ** -2.0 * 2.0 ** 3.0)

    def test_scalar_in_scalar_out(self):
        calc = ModulusCalculus(PowerModulus())
        assert isinstance(calc.phi(2.0), float)
        assert calc.phi(np.array([1.0, 2.0])).shape == (2,)

    def test_tabulated_values(self):
        calc = ModulusCalculus(TabulatedModulus(table=TABLE))
        assert calc.omega(3.0) == pytest.approx(1.75)
        assert calc.omega(6.0) == pytest.approx(2.5)
        # phi(2) = 1/2 + (1 + 1.5)/2
        assert calc.phi(2.0) == pytest.approx(1.75)
        assert calc.omega_inverse(1.75) == pytest.approx(3.0)

    @pytest.mark.parametrize("calc", calculators())
    def test_phi_against_quadrature(self, calc, integrate_omega):
        for t in (0.3, 1.7, 3.2, 9.0):
            assert calc.phi(t) == pytest.approx(integrate_omega(calc, t), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("calc", calculators())
    def test_phi_inverse(self, calc):
        t = np.array([0.0, 0.2, 1.0, 2.5, 7.0])
        assert calc.phi_inverse(calc.phi(t)) == pytest.approx(t, rel=1e-10, abs=1e-12)

    def test_scaled_conjugate(self):
        calc = ModulusCalculus(PowerModulus(K=1.0, alpha=1.0))
        # Conjugate of c t^2/2 is s^2/(2c)
        assert calc.scaled_phi_conjugate(3.0, 2.0) == pytest.approx(9.0 / 4.0)


class TestFenchelIdentities:
    """Young-type identities and the inequalities the constructions rely on."""

    @pytest.mark.parametrize("calc", calculators())
    @settings(max_examples=100, deadline=None)
    @given(delta=positive_reals())
    def test_young_equality(self, calc, delta):
        t = calc.omega_inverse(delta)
        assert calc.phi(t) + calc.phi_conjugate(delta) == pytest.approx(delta * t, rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("calc", calculators())
    @settings(max_examples=100, deadline=None)
    @given(t=positive_reals(), s=positive_reals())
    def test_young_inequality(self, calc, t, s):
        assert calc.phi(t) + calc.phi_conjugate(s) >= s * t * (1.0 - 1e-12)

    @pytest.mark.parametrize("calc", calculators())
    def test_doubling_inequalities(self, calc):
        t = np.random.default_rng(3).uniform(1e-3, 20.0, 1000)
        w = calc.omega(t)
        assert np.all(calc.phi(2.0 * t) > t * w)
        assert np.all(2.0 * t * w >= calc.phi(2.0 * t) * (1.0 - 1e-12))
        assert np.all(calc.phi(t) >= 0.5 * t * calc.omega(0.5 * t) * (1.0 - 1e-12))
