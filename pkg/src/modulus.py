"""Moduli of continuity and the functions derived from them."""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DomainError, InputError

Real = Union[float, np.ndarray]


def _check_nonnegative(value: Real, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite and >= 0")
    return arr


def _out(arr: np.ndarray, like: Real) -> Real:
    return float(arr) if np.ndim(like) == 0 else arr


@dataclass(frozen=True)
class PowerModulus:
    """omega(t) = K * t**alpha."""

    K: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        ok, error = self.validate()
        if not ok:
            raise InputError(error)

    def validate(self) -> Tuple[bool, Optional[str]]:
        if not (self.K > 0 and math.isfinite(self.K)):
            return False, f"K must be positive, got {self.K}"
        if not (0.0 < self.alpha <= 1.0):
            return False, f"alpha must lie in (0, 1], got {self.alpha}"
        return True, None

    def to_dict(self) -> dict:
        return {"kind": "power", "K": self.K, "alpha": self.alpha}


class _PiecewiseLinear:
    """Increasing piecewise-linear function through (0, 0), extended with its last slope."""

    def __init__(self, knots: np.ndarray, values: np.ndarray):
        self.knots = knots
        self.values = values
        self.slopes = np.diff(values) / np.diff(knots)
        # Integral up to each knot (trapezoid rule is exact on linear pieces)
        self.cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(knots))))

    def _segment(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(idx, 0, len(self.slopes) - 1)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        k = self._segment(x)
        return self.values[k] + self.slopes[k] * (x - self.knots[k])

    def integral(self, x: np.ndarray) -> np.ndarray:
        k = self._segment(x)
        tau = x - self.knots[k]
        return self.cumulative[k] + self.values[k] * tau + 0.5 * self.slopes[k] * tau * tau

    def inverse(self) -> "_PiecewiseLinear":
        return _PiecewiseLinear(self.values, self.knots)

    def integral_inverse(self, v: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.cumulative, v, side="right") - 1
        k = np.clip(idx, 0, len(self.slopes) - 1)
        rest = v - self.cumulative[k]
        w = self.values[k]
        s = self.slopes[k]
        # Stable root of s/2 tau^2 + w tau - rest = 0
        denom = w + np.sqrt(w * w + 2.0 * s * rest)
        tau = np.where(rest > 0, 2.0 * rest / np.where(denom > 0, denom, 1.0), 0.0)
        return self.knots[k] + tau


@dataclass(frozen=True)
class TabulatedModulus:
    """Concave increasing modulus given by samples, interpolated linearly."""

    table: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ok, error = self.validate()
        if not ok:
            raise InputError(error)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        data = np.asarray(self.table, dtype=float)
        t, w = data[:, 0], data[:, 1]
        if t[0] > 0.0:
            t = np.concatenate(([0.0], t))
            w = np.concatenate(([0.0], w))
        return t, w

    def validate(self) -> Tuple[bool, Optional[str]]:
        data = np.asarray(self.table, dtype=float)
        if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 1:
            return False, "table must be a list of (t, omega) pairs"
        if not np.all(np.isfinite(data)):
            return False, "table entries must be finite"
        t, w = self.arrays()
        if t[0] != 0.0 or w[0] != 0.0:
            return False, "table must start at omega(0) = 0"
        if np.any(np.diff(t) <= 0) or np.any(np.diff(w) <= 0):
            return False, "table must be strictly increasing in t and omega"
        slopes = np.diff(w) / np.diff(t)
        if np.any(np.diff(slopes) > 1e-12 * max(1.0, float(slopes.max()))):
            return False, "table is not concave (slopes must be non-increasing)"
        if slopes[-1] <= 0:
            return False, "final slope must be positive so that omega is unbounded"
        return True, None

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "table": [list(map(float, row)) for row in self.table]}


Modulus = Union[PowerModulus, TabulatedModulus]


def modulus_from_dict(spec: dict) -> Modulus:
    """Build a modulus from its file representation."""
    kind = spec.get("kind", "power")
    if kind == "power":
        return PowerModulus(K=float(spec.get("K", 1.0)), alpha=float(spec.get("alpha", 1.0)))
    if kind == "tabulated":
        table = spec.get("table")
        if not table:
            raise InputError("tabulated modulus needs a non-empty table", "modulus")
        return TabulatedModulus(table=tuple((float(a), float(b)) for a, b in table))
    raise InputError(f"unknown modulus kind {kind!r}", "modulus")


class ModulusCalculus:
    """
    Evaluators for omega, phi = int omega, omega^-1, phi* = int omega^-1 and phi^-1.

    Power moduli use closed forms. Tabulated moduli are piecewise linear, so
    every derived function is integrated exactly segment by segment.
    """

    def __init__(self, modulus: Modulus):
        self.modulus = modulus
        if isinstance(modulus, TabulatedModulus):
            t, w = modulus.arrays()
            self._omega = _PiecewiseLinear(t, w)
            self._omega_inv = self._omega.inverse()
        else:
            self._omega = None
            self._omega_inv = None

    @property
    def is_power(self) -> bool:
        return isinstance(self.modulus, PowerModulus)

    def omega(self, t: Real) -> Real:
        arr = _check_nonnegative(t, "t")
        if self.is_power:
            m = self.modulus
            return _out(m.K * arr ** m.alpha, t)
        return _out(self._omega(arr), t)

    def omega_inverse(self, s: Real) -> Real:
        arr = _check_nonnegative(s, "s")
        if self.is_power:
            m = self.modulus
            return _out((arr / m.K) ** (1.0 / m.alpha), s)
        return _out(self._omega_inv(arr), s)

    def phi(self, t: Real) -> Real:
        arr = _check_nonnegative(t, "t")
        if self.is_power:
            m = self.modulus
            return _out(m.K * arr ** (1.0 + m.alpha) / (1.0 + m.alpha), t)
        return _out(self._omega.integral(arr), t)

    def phi_conjugate(self, s: Real) -> Real:
        arr = _check_nonnegative(s, "s")
        if self.is_power:
            m = self.modulus
            a = m.alpha
            return _out((a / (1.0 + a)) * m.K ** (-1.0 / a) * arr ** (1.0 + 1.0 / a), s)
        return _out(self._omega_inv.integral(arr), s)

    def phi_inverse(self, v: Real) -> Real:
        arr = _check_nonnegative(v, "v")
        if self.is_power:
            m = self.modulus
            return _out(((1.0 + m.alpha) * arr / m.K) ** (1.0 / (1.0 + m.alpha)), v)
        return _out(self._omega.integral_inverse(arr), v)

    def scaled_phi_conjugate(self, s: Real, scale: float) -> Real:
        """Conjugate of scale * phi, i.e. scale * phi*(s / scale)."""
        return scale * self.phi_conjugate(np.asarray(s, dtype=float) / scale)

    def to_dict(self) -> dict:
        return self.modulus.to_dict()
