"""The C^{1,1} body: convex hull of the balls B(y - r N(y), r)."""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import InfeasibleError, InputError, RegionError
from .feasibility import FEASIBILITY_TOL, TangencyProblem, check_c11
from .geometry import Polytope, Vector, box_exit, project_polytope, unit_directions

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9
RAY_XTOL = 1e-13


@dataclass(eq=False)
class BodyC11:
    """
    V = conv(centers) + B(0, radius).

    The Minkowski-sum form makes b_V(x) = dist(x, conv(centers)) - radius
    exact, so every query reduces to one polytope projection.
    """

    centers: Polytope
    radius: float
    source: Optional[TangencyProblem] = None

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InputError(f"radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.centers.dimension

    @property
    def bounded(self) -> bool:
        # Finitely many balls always have a bounded hull
        return True

    def _project(self, x) -> Tuple[Vector, float]:
        return project_polytope(np.asarray(x, dtype=float), self.centers)

    def signed_distance(self, x) -> float:
        """b_V(x): negative inside, zero on the boundary, positive outside."""
        _, d = self._project(x)
        return d - self.radius

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.signed_distance(x) <= tol

    def inradius_at(self, x) -> float:
        """Radius of the largest ball centred at x that fits in the body (0 outside)."""
        return max(0.0, -self.signed_distance(x))

    def distance_gradient(self, x) -> Vector:
        """Gradient of b_V at a point off conv(centers)."""
        x = np.asarray(x, dtype=float)
        pi, d = self._project(x)
        if d <= 1e-12 * max(1.0, self.radius):
            raise RegionError("b_V is not differentiable inside conv(centers)")
        return (x - pi) / d

    def project_boundary(self, x) -> Vector:
        """Nearest boundary point P_S(x), unique whenever b_V(x) > -radius."""
        x = np.asarray(x, dtype=float)
        pi, d = self._project(x)
        if d <= BOUNDARY_TOL:
            raise RegionError("point is too deep inside the body for a unique boundary projection")
        return pi + self.radius * (x - pi) / d

    def boundary_normal(self, s, tol: float = BOUNDARY_TOL) -> Vector:
        """Outer unit normal N_S(s) at a boundary point."""
        s = np.asarray(s, dtype=float)
        pi, d = self._project(s)
        if abs(d - self.radius) > tol:
            raise RegionError(f"point is not on the boundary (b_V = {d - self.radius:.3e})")
        if d <= 1e-12:
            raise RegionError("boundary point lies in conv(centers)")
        return (s - pi) / d

    def interior_point(self) -> Vector:
        """A point at depth radius: the centroid of the centers."""
        return self.centers.centroid()

    def ray_boundary(self, origin, direction, clip_box: Optional[Tuple[Vector, Vector]] = None) -> Optional[float]:
        """
        Parameter t > 0 with b_V(origin + t * direction) = 0.

        Returns None when a clip box is given and the ray leaves it first.
        """
        origin = np.asarray(origin, dtype=float)
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u)
        if self.signed_distance(origin) >= 0:
            raise RegionError("ray origin must be interior")
        reach = float(np.max(np.linalg.norm(self.centers.vertices - origin, axis=1))) + self.radius + 1.0
        if clip_box is not None:
            reach = min(reach, box_exit(origin, u, clip_box))
            if self.signed_distance(origin + reach * u) < 0:
                return None
        return optimize.brentq(lambda t: self.signed_distance(origin + t * u), 0.0, reach, xtol=RAY_XTOL)

    def gauge(self, x, origin) -> float:
        """Minkowski gauge of the body translated so that origin becomes 0."""
        origin = np.asarray(origin, dtype=float)
        if not self.signed_distance(origin) < -1e-6:
            raise InputError("gauge origin must be strictly interior")
        u = np.asarray(x, dtype=float) - origin
        length = float(np.linalg.norm(u))
        if length == 0.0:
            return 0.0
        t = self.ray_boundary(origin, u)
        return length / t

    def gauge_gradient(self, x, origin) -> Vector:
        """N(s) / <N(s), s - origin> at the radial boundary point s of x."""
        origin = np.asarray(origin, dtype=float)
        x = np.asarray(x, dtype=float)
        mu = self.gauge(x, origin)
        if mu == 0.0:
            raise RegionError("gauge is not differentiable at its origin")
        s = origin + (x - origin) / mu
        n = self.distance_gradient(s)
        return n / float(n @ (s - origin))

    def sample_boundary(self, count: int, seed: int, interior=None,
                        clip_box: Optional[Tuple[Vector, Vector]] = None) -> List[Vector]:
        """Deterministic boundary samples by ray casting from an interior point."""
        if count < 1:
            raise InputError("count must be at least 1")
        origin = self.interior_point() if interior is None else np.asarray(interior, dtype=float)
        rng = np.random.default_rng(seed)
        samples = []
        for u in unit_directions(count, self.dimension, rng):
            t = self.ray_boundary(origin, u, clip_box)
            if t is None:
                continue
            samples.append(origin + t * u)
        logger.debug("sampled %d boundary points (seed %d)", len(samples), seed)
        return samples


def build_c11(problem: TangencyProblem, r: float, tol: float = FEASIBILITY_TOL) -> BodyC11:
    """
    Construct V = conv(union of B(y - r N(y), r)) for feasible data.

    Raises:
        InfeasibleError: the pairwise C^{1,1} condition fails at radius r.
    """
    if not problem.space.is_euclidean:
        raise InputError("the C^{1,1} construction needs the Euclidean norm")
    report = check_c11(problem, r, tol)
    if not report.feasible:
        message = report.diagnostic or f"data is not C^{{1,1}}-feasible at r = {r}"
        raise InfeasibleError(message, report.violating_pair)
    centers = problem.points - r * problem.normals
    logger.info("built C^{1,1} body with %d centers at r = %g", len(problem), r)
    return BodyC11(centers=Polytope(centers), radius=float(r), source=problem)
