"""
The C^{1,omega} body {F <= 1} and its C^{1,alpha} variant for smooth l_p norms.

    g(x) = min_y 1 + <N(y), x - y> + c * phi(||x - y||)
    H    = conv(g)
    F    = H + w * phi(d_A)           (omega variant, c = 1/delta, w = phi*(delta)/delta)
    F    = H + d_A ** (1 + alpha)     (alpha variant, kernel M t^(1+alpha)/(1+alpha), c = 1)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from .envelope import (
    DirectConcaveMax,
    EnvelopeBackend,
    GridBiconjugate,
    MinimumOfPieces,
    agreement_tolerance,
)
from .errors import BackendDisagreementError, DomainError, InfeasibleError, InputError, RegionError
from .feasibility import FEASIBILITY_TOL, TangencyProblem, check_c1alpha_dual, check_c1omega
from .geometry import (
    Polytope,
    Vector,
    box_exit,
    norm_gradient,
    parallel_map,
    project_polytope,
    unit_directions,
)
from .modulus import ModulusCalculus, PowerModulus

logger = logging.getLogger(__name__)

LEVEL_TOL = 1e-6
BOUNDARY_XTOL = 1e-13
REGION_MARGIN = 1.1


@dataclass(frozen=True)
class HilbertOmega:
    """Euclidean construction for a general modulus."""

    kind: str = field(default="c1omega", init=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class DualAlpha:
    """Construction from dual functionals for omega(t) = t^alpha under an l_p norm."""

    alpha: float
    M: float
    kind: str = field(default="c1alpha", init=False)

    @classmethod
    def from_delta(cls, alpha: float, delta: float) -> "DualAlpha":
        # delta = alpha / ((1 + alpha) M^(1/alpha))
        return cls(alpha=alpha, M=(alpha / ((1.0 + alpha) * delta)) ** alpha)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "M": self.M}


Variant = Union[HilbertOmega, DualAlpha]


@dataclass
class LevelSetReport:
    """Gradient bounds observed on the level set F = 1."""

    samples: int
    lower_bound: float
    upper_bound: float
    fitted_L: float
    min_gradient: float
    max_gradient: float
    minimum_value: float
    expected_minimum: float
    passed: bool
    witnesses: List[list] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "fitted_L": self.fitted_L,
            "min_gradient": self.min_gradient,
            "max_gradient": self.max_gradient,
            "minimum_value": self.minimum_value,
            "expected_minimum": self.expected_minimum,
            "passed": self.passed,
            "witnesses": self.witnesses,
        }


@dataclass(eq=False)
class BodyC1Omega:
    """Sublevel-set body {F <= 1} built from feasible tangency data."""

    source: TangencyProblem
    modulus: ModulusCalculus
    delta: float
    variant: Variant = field(default_factory=HilbertOmega)
    envelope: EnvelopeBackend = field(default_factory=DirectConcaveMax)

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise InputError(f"delta must be positive, got {self.delta}")
        problem = self.source
        normals = problem.unit_normals
        if isinstance(self.variant, DualAlpha):
            kernel = ModulusCalculus(PowerModulus(K=self.variant.M, alpha=self.variant.alpha))
            scale = 1.0
            self.inner_offset = self.variant.M ** (-1.0 / self.variant.alpha)
        else:
            if not problem.space.is_euclidean:
                raise InputError("the C^{1,omega} construction needs the Euclidean norm")
            kernel = self.modulus
            scale = 1.0 / self.delta
            self.inner_offset = float(self.modulus.omega_inverse(self.delta))
        self.g = MinimumOfPieces(
            centers=problem.points,
            slopes=problem.normals,
            values=np.ones(len(problem)),
            kernel=kernel,
            scale=scale,
            space=problem.space,
        )
        self.z_points = problem.points - self.inner_offset * normals
        self.A = Polytope(np.vstack((problem.points, self.z_points)))
        low, high = self.A.bounding_box()
        pad = REGION_MARGIN * self.reach
        self.box = (low - pad, high + pad)

    @property
    def dimension(self) -> int:
        return self.source.dimension

    @property
    def space(self):
        return self.source.space

    @property
    def bounded(self) -> bool:
        return True

    @property
    def distance_weight(self) -> float:
        if isinstance(self.variant, DualAlpha):
            return 1.0
        return float(self.modulus.phi_conjugate(self.delta)) / self.delta

    @property
    def inf_value(self) -> float:
        """inf F, attained at every z point."""
        if isinstance(self.variant, DualAlpha):
            return 1.0 - self.delta
        return 1.0 - self.distance_weight

    @property
    def reach(self) -> float:
        """Bound on ||x - z|| over the level set, for some z in conv(z points)."""
        if isinstance(self.variant, DualAlpha):
            return self.delta ** (1.0 / (1.0 + self.variant.alpha)) + self.inner_offset
        return float(self.modulus.phi_inverse(1.0)) + self.inner_offset

    @property
    def gradient_modulus(self) -> ModulusCalculus:
        """Modulus of continuity of grad F, up to a constant."""
        if isinstance(self.variant, DualAlpha):
            return ModulusCalculus(PowerModulus(K=1.0, alpha=self.variant.alpha))
        return self.modulus

    def gradient_lower_bound(self) -> float:
        return (1.0 - self.inf_value) / self.reach

    def in_region(self, x, slack: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        low, high = self.box
        return bool(np.all(x >= low - slack) and np.all(x <= high + slack))

    def _check_region(self, x) -> Vector:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise InputError(f"expected a point of dimension {self.dimension}")
        if not self.in_region(x):
            raise RegionError(f"point {x.tolist()} is outside the validated region")
        return x

    def interior_point(self) -> Vector:
        """Centroid of the z points: a global minimizer of F."""
        return self.z_points.mean(axis=0)

    def eval_g(self, x) -> float:
        return float(self.g(np.asarray(x, dtype=float)))

    def _envelope(self, x) -> Tuple[float, Vector]:
        if isinstance(self.envelope, DirectConcaveMax):
            return self.envelope.maximizer(self.g, x)
        return self.envelope.evaluate(self.g, x), self.envelope.gradient(self.g, x)

    def eval_H(self, x) -> float:
        x = self._check_region(x)
        return self.envelope.evaluate(self.g, x)

    def distance_to_A(self, x) -> Tuple[Vector, float]:
        return project_polytope(np.asarray(x, dtype=float), self.A, self.space)

    def _distance_term(self, x) -> Tuple[float, Vector]:
        pi, d = self.distance_to_A(x)
        if d <= 1e-14:
            return 0.0, np.zeros(self.dimension)
        if isinstance(self.variant, DualAlpha):
            a = self.variant.alpha
            return d ** (1.0 + a), (1.0 + a) * d ** a * norm_gradient(x - pi, self.space)
        w = self.distance_weight
        value = w * float(self.modulus.phi(d))
        return value, w * float(self.modulus.omega(d)) * (x - pi) / d

    def eval_F(self, x) -> float:
        x = self._check_region(x)
        h = self.envelope.evaluate(self.g, x)
        return h + self._distance_term(x)[0]

    def grad_F(self, x) -> Vector:
        return self.value_and_gradient(x)[1]

    def value_and_gradient(self, x) -> Tuple[float, Vector]:
        x = self._check_region(x)
        h, dh = self._envelope(x)
        t, dt = self._distance_term(x)
        return h + t, np.asarray(dh, dtype=float) + dt

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.eval_F(x) <= 1.0 + tol

    def gradient_norm(self, grad: Vector) -> float:
        """||grad||_*, the dual norm of a differential."""
        return float(self.space.dual().norm(grad))

    def boundary_normal(self, s) -> Vector:
        """Unit outer normal at a boundary point, from the differential of F."""
        grad = self.grad_F(s)
        if self.space.is_euclidean:
            return grad / np.linalg.norm(grad)
        return norm_gradient(grad, self.space.dual())

    def ray_boundary(self, origin, direction, clip_box: Optional[Tuple[Vector, Vector]] = None) -> float:
        """Parameter t > 0 with F(origin + t * direction) = 1 inside the search box."""
        origin = np.asarray(origin, dtype=float)
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
        box = self.box if clip_box is None else _intersect(self.box, clip_box)
        reach = box_exit(origin, u, box)

        def level(t):
            return self.eval_F(origin + t * u) - 1.0

        if level(0.0) >= 0.0:
            raise RegionError("ray origin must satisfy F < 1")
        if level(reach) < 0.0:
            raise RegionError(f"ray from {origin.tolist()} does not cross F = 1 inside the box")
        return optimize.brentq(level, 0.0, reach, xtol=BOUNDARY_XTOL)

    def boundary_sample(self, count: int, seed: int, interior=None,
                        clip_box: Optional[Tuple[Vector, Vector]] = None, threads: int = 1) -> List[Vector]:
        """Deterministic points with F = 1 by ray casting from an interior point."""
        if count < 1:
            raise InputError("count must be at least 1")
        origin = self.interior_point() if interior is None else np.asarray(interior, dtype=float)
        rng = np.random.default_rng(seed)
        directions = list(unit_directions(count, self.dimension, rng))

        def cast(u):
            return origin + self.ray_boundary(origin, u, clip_box) * u

        samples = parallel_map(cast, directions, threads)
        logger.debug("sampled %d level-set points (seed %d)", len(samples), seed)
        return samples

    def holder_ratio(self, points: List[Vector], gradients: List[Vector]) -> float:
        """max ||grad F(s) - grad F(t)|| / omega(||s - t||) over sampled pairs."""
        P = np.asarray(points, dtype=float)
        G = np.asarray(gradients, dtype=float)
        best = 0.0
        for i in range(len(P) - 1):
            dist = self.space.norm(P[i + 1:] - P[i])
            keep = dist > 1e-12
            if not np.any(keep):
                continue
            num = self.space.dual().norm(G[i + 1:][keep] - G[i])
            den = np.asarray(self.gradient_modulus.omega(dist[keep]))
            best = max(best, float(np.max(num / den)))
        return best

    def level_set_bounds_check(self, samples: int, seed: int, threads: int = 1) -> LevelSetReport:
        """
        Sample the level set and test the gradient pinching bounds.

        The lower bound (1 - inf F) / reach must hold exactly. The upper bound
        L * omega(reach) uses the Hoelder constant L fitted on the samples and
        the z points (where the gradient vanishes).
        """
        points = self.boundary_sample(samples, seed, threads=threads)
        evaluated = parallel_map(self.value_and_gradient, points, threads)
        on_level = [(p, g) for p, (v, g) in zip(points, evaluated) if abs(v - 1.0) <= LEVEL_TOL]
        z_eval = [self.value_and_gradient(z) for z in self.z_points]
        minimum_value = min(v for v, _ in z_eval)

        pts = [p for p, _ in on_level] + list(self.z_points)
        grads = [g for _, g in on_level] + [g for _, g in z_eval]
        fitted = self.holder_ratio(pts, grads)
        lower = self.gradient_lower_bound()
        upper = fitted * float(self.gradient_modulus.omega(self.reach))
        norms = np.array([self.gradient_norm(g) for _, g in on_level]) if on_level else np.zeros(0)

        witnesses = []
        for (p, _), n in zip(on_level, norms):
            if n < lower * (1.0 - 1e-9) or n > upper * (1.0 + 1e-9) + 1e-12:
                witnesses.append([float(v) for v in p])
        passed = (not witnesses and len(on_level) == len(points)
                  and abs(minimum_value - self.inf_value) <= 1e-5)
        if len(on_level) < len(points):
            logger.warning("%d of %d samples missed the level set", len(points) - len(on_level), len(points))
        return LevelSetReport(
            samples=len(on_level),
            lower_bound=lower,
            upper_bound=upper,
            fitted_L=fitted,
            min_gradient=float(norms.min()) if norms.size else math.nan,
            max_gradient=float(norms.max()) if norms.size else math.nan,
            minimum_value=float(minimum_value),
            expected_minimum=self.inf_value,
            passed=bool(passed),
            witnesses=witnesses[:10],
        )

    def grid_backend(self, resolution: int) -> GridBiconjugate:
        return GridBiconjugate(self.box[0], self.box[1], resolution)

    def envelope_agreement(self, count: int, seed: int, resolution: int = 513,
                           tolerance: Optional[float] = None) -> float:
        """
        Compare the body's envelope backend with a grid biconjugate on random points.

        Returns the largest observed difference.

        Raises:
            BackendDisagreementError: a point differs by more than the tolerance.
        """
        grid = self.grid_backend(resolution)
        other = grid if not isinstance(self.envelope, GridBiconjugate) else DirectConcaveMax()
        if tolerance is None:
            tolerance = agreement_tolerance(self.g, grid)
        low, high = self.box
        # Stay a few cells away from the box faces
        inset = 4.0 * grid.spacing
        rng = np.random.default_rng(seed)
        points = rng.uniform(low + inset, high - inset, size=(count, self.dimension))
        worst = 0.0
        for x in points:
            first = self.envelope.evaluate(self.g, x)
            second = other.evaluate(self.g, x)
            diff = abs(first - second)
            if diff > tolerance:
                raise BackendDisagreementError(x, first, second, tolerance)
            worst = max(worst, diff)
        logger.info("envelope backends agree to %.3e on %d points (tolerance %.3e)", worst, count, tolerance)
        return worst

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.to_dict(),
            "delta": self.delta,
            "modulus": self.modulus.to_dict(),
            "backend": self.envelope.to_dict(),
        }


def _intersect(first: Tuple[Vector, Vector], second: Tuple[Vector, Vector]) -> Tuple[Vector, Vector]:
    low = np.maximum(first[0], np.asarray(second[0], dtype=float))
    high = np.minimum(first[1], np.asarray(second[1], dtype=float))
    if np.any(high <= low):
        raise RegionError("clip box does not meet the validated region")
    return low, high


def build_c1omega(problem: TangencyProblem, modulus: ModulusCalculus, delta: float,
                  backend: Optional[EnvelopeBackend] = None, tol: float = FEASIBILITY_TOL) -> BodyC1Omega:
    """
    Construct {F <= 1} for C^{1,omega}-feasible Euclidean data.

    Raises:
        InfeasibleError: the pairwise condition fails at this delta.
    """
    report = check_c1omega(problem, modulus, delta, tol)
    if not report.feasible:
        message = report.diagnostic or f"data is not C^{{1,omega}}-feasible at delta = {delta}"
        raise InfeasibleError(message, report.violating_pair)
    body = BodyC1Omega(problem, modulus, float(delta), HilbertOmega(), backend or DirectConcaveMax())
    logger.info("built C^{1,omega} body: %d data, delta = %g, inf F = %.12g", len(problem), delta, body.inf_value)
    return body


def build_c1alpha(problem: TangencyProblem, alpha: float, delta: float,
                  backend: Optional[EnvelopeBackend] = None, tol: float = FEASIBILITY_TOL) -> BodyC1Omega:
    """
    Construct {F <= 1} for C^{1,alpha}-feasible dual data under an l_p norm.

    The norm must satisfy ||x+h||^(1+a) + ||x-h||^(1+a) - 2||x||^(1+a) <= L||h||^(1+a),
    which holds for l_p exactly when min(p, 2) >= 1 + alpha.
    """
    if min(problem.space.exponent, 2.0) < 1.0 + alpha - 1e-12:
        raise DomainError(f"the l_{problem.space.exponent:g} norm is not (1+alpha)-smooth for alpha = {alpha}")
    report = check_c1alpha_dual(problem, alpha, delta, tol)
    if not report.feasible:
        message = report.diagnostic or f"data is not C^{{1,alpha}}-feasible at delta = {delta}"
        raise InfeasibleError(message, report.violating_pair)
    variant = DualAlpha.from_delta(alpha, delta)
    modulus = ModulusCalculus(PowerModulus(K=1.0, alpha=alpha))
    body = BodyC1Omega(problem, modulus, float(delta), variant, backend or DirectConcaveMax())
    logger.info("built C^{1,alpha} body: %d data, alpha = %g, M = %g", len(problem), alpha, variant.M)
    return body
