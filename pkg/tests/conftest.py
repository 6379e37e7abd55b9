"""Shared fixtures: small data sets and the bodies built from them."""

import numpy as np
import pytest
from scipy import integrate

from src.body_c11 import build_c11
from src.body_c1omega import build_c1omega
from src.config import Config
from src.fixtures import gen_single_datum, gen_sphere_data, gen_stadium_data
from src.modulus import ModulusCalculus, PowerModulus, TabulatedModulus


@pytest.fixture
def circle_problem():
    return gen_sphere_data(8)


@pytest.fixture
def circle_body(circle_problem):
    return build_c11(circle_problem, 1.0)


@pytest.fixture
def stadium_problem():
    return gen_stadium_data(24)


@pytest.fixture
def stadium_body(stadium_problem):
    return build_c11(stadium_problem, 1.0)


@pytest.fixture
def lipschitz_modulus():
    """omega(t) = t."""
    return ModulusCalculus(PowerModulus(K=1.0, alpha=1.0))


@pytest.fixture
def circle_c1omega(circle_problem, lipschitz_modulus):
    # delta_max is 1/2 for the unit circle with omega(t) = t
    return build_c1omega(circle_problem, lipschitz_modulus, 0.25)


@pytest.fixture
def single_datum_body(lipschitz_modulus):
    """g(x) = 1 + x + x^2 on the line, already convex."""
    return build_c1omega(gen_single_datum(1), lipschitz_modulus, 0.5)


@pytest.fixture
def config(tmp_path, monkeypatch):
    monkeypatch.delenv(Config.THREADS_ENV, raising=False)
    cfg = Config(tmp_path / "convex_jets_config")
    cfg.load()
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def integrate_omega():
    """phi(t) by adaptive quadrature of omega, independent of the closed forms."""

    def quad(calc: ModulusCalculus, t: float) -> float:
        points = None
        if isinstance(calc.modulus, TabulatedModulus):
            knots, _ = calc.modulus.arrays()
            inner = knots[(knots > 0) & (knots < t)][:50]
            points = inner if len(inner) else None
        value, _ = integrate.quad(lambda s: float(calc.omega(s)), 0.0, t, epsabs=1e-12, epsrel=0.0,
                                  limit=1000, points=points)
        return value

    return quad
