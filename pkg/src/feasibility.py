"""Pairwise feasibility tests for C^{1,1}, C^{1,omega} and C^{1,alpha} tangency data."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError, InputError
from .geometry import NormSpace, as_vector, norm_gradient
from .modulus import ModulusCalculus

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
UNIT_TOL = 1e-12


@dataclass(eq=False)
class TangencyProblem:
    """
    Finite tangency data: points with outer unit normals (Euclidean) or
    unit dual functionals (any norm).
    """

    space: NormSpace
    points: np.ndarray
    normals: np.ndarray
    dual: bool = False  # True when normals are dual functionals D(y)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        ok, error = self.validate()
        if not ok:
            raise InputError(error)

    def validate(self) -> Tuple[bool, Optional[str]]:
        """Check shapes and unit normals. Returns (ok, error_message)."""
        if self.points.shape[0] == 0:
            return False, "at least one datum is required"
        if self.points.shape != self.normals.shape:
            return False, f"points {self.points.shape} and normals {self.normals.shape} differ in shape"
        if self.points.shape[1] != self.space.dimension:
            return False, f"data dimension {self.points.shape[1]} does not match space dimension {self.space.dimension}"
        for i in range(len(self)):
            if not np.all(np.isfinite(self.points[i])) or not np.all(np.isfinite(self.normals[i])):
                return False, f"data[{i}]: non-finite entries"
            norm = self.normal_norm(self.normals[i])
            if abs(norm - 1.0) > UNIT_TOL:
                what = "dual functional" if self.dual else "normal"
                return False, f"data[{i}]: {what} has norm {norm:.15g}, expected 1"
        if not self.dual and not self.space.is_euclidean:
            return False, "non-Euclidean data must be given as dual functionals"
        return True, None

    def normal_norm(self, v) -> float:
        return float(self.space.dual().norm(v) if self.dual else self.space.norm(v))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def unit_normals(self) -> np.ndarray:
        """Unit vectors N(y); for dual data the unique N(y) with D(y)(N(y)) = 1."""
        if not self.dual or self.space.is_euclidean:
            return self.normals
        dual_space = self.space.dual()
        return np.vstack([norm_gradient(d, dual_space) for d in self.normals])

    def scaled(self, factor: float) -> "TangencyProblem":
        return TangencyProblem(self.space, self.points * factor, self.normals.copy(), self.dual)

    def subset(self, indices) -> "TangencyProblem":
        idx = list(indices)
        return TangencyProblem(self.space, self.points[idx], self.normals[idx], self.dual)


@dataclass
class FeasibilityReport:
    """Outcome of a pairwise feasibility scan."""

    condition: str
    feasible: bool
    extremal_constant: float
    constant: Optional[float] = None
    violating_pair: Optional[Tuple[int, int]] = None
    worst_pair: Optional[Tuple[int, int]] = None
    worst_margin: float = math.inf
    margin_histogram: dict = field(default_factory=dict)
    diagnostic: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "feasible": self.feasible,
            "extremal_constant": _finite_or_str(self.extremal_constant),
            "constant": self.constant,
            "violating_pair": list(self.violating_pair) if self.violating_pair else None,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "worst_margin": _finite_or_str(self.worst_margin),
            "margin_histogram": self.margin_histogram,
            "diagnostic": self.diagnostic,
        }


def _finite_or_str(value: float):
    return value if math.isfinite(value) else ("inf" if value > 0 else "-inf")


@dataclass
class _PairTerms:
    lhs: np.ndarray  # lhs[i, j] = <N(y_j), y_j - x_i>
    dn: np.ndarray  # ||N(x_i) - N(y_j)|| (dual norm for functionals)
    dist: np.ndarray  # ||y_j - x_i||
    offdiag: np.ndarray


def _pair_terms(problem: TangencyProblem) -> _PairTerms:
    X = problem.points
    G = problem.normals
    m = len(problem)
    own = np.einsum("ij,ij->i", G, X)
    lhs = own[np.newaxis, :] - X @ G.T
    diff_g = G[:, np.newaxis, :] - G[np.newaxis, :, :]
    normal_space = problem.space.dual() if problem.dual else problem.space
    dn = normal_space.norm(diff_g)
    dist = problem.space.norm(X[:, np.newaxis, :] - X[np.newaxis, :, :])
    offdiag = ~np.eye(m, dtype=bool)
    return _PairTerms(lhs=lhs, dn=dn, dist=dist, offdiag=offdiag)


def _duplicate_pair(terms: _PairTerms) -> Optional[Tuple[int, int]]:
    scale = max(float(terms.dist.max()), 1.0)
    dup = terms.offdiag & (terms.dist <= 1e-15 * scale) & (terms.dn > UNIT_TOL)
    if np.any(dup):
        i, j = np.argwhere(dup)[0]
        return int(i), int(j)
    return None


def _histogram(values: np.ndarray, bins: int = 20) -> dict:
    if values.size == 0:
        return {"edges": [], "counts": []}
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def _extremal(terms: _PairTerms, ratio: Callable[[np.ndarray, np.ndarray], np.ndarray],
              tol: float) -> Tuple[float, Optional[Tuple[int, int]]]:
    """Infimum over ordered pairs of the largest admissible constant."""
    if _duplicate_pair(terms) is not None:
        return 0.0, _duplicate_pair(terms)
    slack = tol * (1.0 + terms.dist)
    negative = terms.offdiag & (terms.lhs < -slack)
    if np.any(negative):
        i, j = np.argwhere(negative)[0]
        return 0.0, (int(i), int(j))
    moving = terms.offdiag & (terms.dn > 0)
    if not np.any(moving):
        return math.inf, None
    values = np.full(terms.lhs.shape, math.inf)
    values[moving] = ratio(np.maximum(terms.lhs[moving], 0.0), terms.dn[moving])
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return float(max(values[i, j], 0.0)), (int(i), int(j))


def _report(condition: str, terms: _PairTerms, margins: np.ndarray, constant: Optional[float],
            extremal: float, extremal_pair: Optional[Tuple[int, int]], tol: float) -> FeasibilityReport:
    duplicate = _duplicate_pair(terms)
    normalized = np.where(terms.offdiag, margins / (1.0 + terms.dist), math.inf)
    if terms.offdiag.any():
        i, j = np.unravel_index(int(np.argmin(normalized)), normalized.shape)
        worst_pair = (int(i), int(j))
        worst_margin = float(margins[i, j])
    else:
        worst_pair, worst_margin = None, math.inf

    if constant is None:
        feasible = extremal > 0
        violating = None if feasible else (extremal_pair or worst_pair)
    else:
        feasible = bool(np.all(margins[terms.offdiag] >= -tol * (1.0 + terms.dist[terms.offdiag])))
        violating = None if feasible else worst_pair

    diagnostic = None
    if duplicate is not None:
        feasible = False
        violating = duplicate
        diagnostic = f"duplicate point with distinct normals: data[{duplicate[0]}] and data[{duplicate[1]}]"

    logger.debug("%s scan: feasible=%s extremal=%s worst=%s", condition, feasible, extremal, worst_pair)
    return FeasibilityReport(
        condition=condition,
        feasible=bool(feasible),
        extremal_constant=extremal,
        constant=constant,
        violating_pair=violating,
        worst_pair=worst_pair,
        worst_margin=worst_margin,
        margin_histogram=_histogram(margins[terms.offdiag]),
        diagnostic=diagnostic,
    )


def _require_euclidean(problem: TangencyProblem):
    if not problem.space.is_euclidean:
        raise InputError("this condition is stated for the Euclidean norm")


def _require_positive(value: float, name: str):
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value}")


def max_c11_radius(problem: TangencyProblem, tol: float = FEASIBILITY_TOL) -> float:
    """Sharp pairwise constant: inf over pairs of 2<N(y), y-x> / ||N(y)-N(x)||^2."""
    _require_euclidean(problem)
    terms = _pair_terms(problem)
    value, _ = _extremal(terms, lambda lhs, dn: 2.0 * lhs / (dn * dn), tol)
    return value


def check_c11(problem: TangencyProblem, r: float, tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Test <N(y), y-x> >= r/2 ||N(y)-N(x)||^2 on every ordered pair."""
    _require_euclidean(problem)
    _require_positive(r, "r")
    terms = _pair_terms(problem)
    extremal, pair = _extremal(terms, lambda lhs, dn: 2.0 * lhs / (dn * dn), tol)
    margins = terms.lhs - 0.5 * r * terms.dn ** 2
    return _report("c11", terms, margins, r, extremal, pair, tol)


def _omega_ratio(modulus: ModulusCalculus):
    def ratio(lhs, dn):
        return np.asarray(modulus.omega(lhs / dn)) / dn
    return ratio


def max_c1omega_delta(problem: TangencyProblem, modulus: ModulusCalculus,
                      tol: float = FEASIBILITY_TOL) -> float:
    """Largest delta with <N(y), y-x> >= ||dN|| omega^-1(delta ||dN||) on all pairs."""
    _require_euclidean(problem)
    terms = _pair_terms(problem)
    value, _ = _extremal(terms, _omega_ratio(modulus), tol)
    return value


def check_c1omega(problem: TangencyProblem, modulus: ModulusCalculus, delta: float,
                  tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Test <N(y), y-x> >= ||N(x)-N(y)|| omega^-1(delta ||N(x)-N(y)||) on every ordered pair."""
    _require_euclidean(problem)
    _require_positive(delta, "delta")
    terms = _pair_terms(problem)
    extremal, pair = _extremal(terms, _omega_ratio(modulus), tol)
    margins = terms.lhs - terms.dn * np.asarray(modulus.omega_inverse(delta * terms.dn))
    return _report("c1omega", terms, margins, delta, extremal, pair, tol)


def _check_alpha(alpha: float):
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")


def max_c1alpha_delta(problem: TangencyProblem, alpha: float, tol: float = FEASIBILITY_TOL) -> float:
    """Largest delta with D(y)(y-x) >= delta ||D(x)-D(y)||_*^(1+1/alpha) on all pairs."""
    _check_alpha(alpha)
    terms = _pair_terms(problem)
    value, _ = _extremal(terms, lambda lhs, dn: lhs / dn ** (1.0 + 1.0 / alpha), tol)
    return value


def check_c1alpha_dual(problem: TangencyProblem, alpha: float, delta: float,
                       tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Test D(y)(y-x) >= delta ||D(x)-D(y)||_*^(1+1/alpha) on every ordered pair."""
    _check_alpha(alpha)
    _require_positive(delta, "delta")
    terms = _pair_terms(problem)
    extremal, pair = _extremal(terms, lambda lhs, dn: lhs / dn ** (1.0 + 1.0 / alpha), tol)
    margins = terms.lhs - delta * terms.dn ** (1.0 + 1.0 / alpha)
    return _report("c1alpha", terms, margins, delta, extremal, pair, tol)


def scan(problem: TangencyProblem, condition: str, modulus: Optional[ModulusCalculus] = None,
         alpha: Optional[float] = None, constant: Optional[float] = None,
         tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """
    Feasibility report for one regularity class.

    With a constant the report tests that constant; without one it reports
    the extremal constant and is feasible iff that constant is positive.
    """
    terms = _pair_terms(problem)
    if condition == "c11":
        if constant is not None:
            return check_c11(problem, constant, tol)
        _require_euclidean(problem)
        extremal, pair = _extremal(terms, lambda lhs, dn: 2.0 * lhs / (dn * dn), tol)
        margins = terms.lhs - 0.5 * (extremal if math.isfinite(extremal) else 0.0) * terms.dn ** 2
    elif condition == "c1omega":
        if modulus is None:
            raise InputError("c1omega needs a modulus")
        if constant is not None:
            return check_c1omega(problem, modulus, constant, tol)
        _require_euclidean(problem)
        extremal, pair = _extremal(terms, _omega_ratio(modulus), tol)
        level = extremal if math.isfinite(extremal) else 0.0
        margins = terms.lhs - terms.dn * np.asarray(modulus.omega_inverse(level * terms.dn))
    elif condition == "c1alpha":
        if alpha is None:
            raise InputError("c1alpha needs alpha")
        if constant is not None:
            return check_c1alpha_dual(problem, alpha, constant, tol)
        _check_alpha(alpha)
        extremal, pair = _extremal(terms, lambda lhs, dn: lhs / dn ** (1.0 + 1.0 / alpha), tol)
        level = extremal if math.isfinite(extremal) else 0.0
        margins = terms.lhs - level * terms.dn ** (1.0 + 1.0 / alpha)
    else:
        raise InputError(f"unknown regularity class {condition!r}")
    return _report(condition, terms, margins, None, extremal, pair, tol)


def make_problem(points, normals, space: Optional[NormSpace] = None, dual: bool = False) -> TangencyProblem:
    """Convenience constructor from nested sequences."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    space = space or NormSpace.euclidean(pts.shape[1])
    for i, p in enumerate(pts):
        as_vector(p, space.dimension, record=f"data[{i}].point")
    return TangencyProblem(space, pts, np.atleast_2d(np.asarray(normals, dtype=float)), dual)
