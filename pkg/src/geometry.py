"""Vector arithmetic, norms and exact distance to polytopes."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, InputError, NumericalError

logger = logging.getLogger(__name__)

# Points of R^n are plain float arrays of shape (n,)
Vector = np.ndarray

WOLFE_TOL = 1e-12
LP_TOL = 1e-9
# Barycentric weights below this are treated as zero in the minor cycle
WEIGHT_EPS = 1e-14


def as_vector(x, dimension: Optional[int] = None, record: Optional[str] = None) -> Vector:
    """Convert to a finite float vector, optionally checking its dimension."""
    try:
        v = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise InputError("not a numeric vector", record)
    if v.ndim != 1:
        raise InputError(f"expected a flat vector, got shape {v.shape}", record)
    if dimension is not None and v.shape[0] != dimension:
        raise InputError(f"expected dimension {dimension}, got {v.shape[0]}", record)
    if not np.all(np.isfinite(v)):
        raise InputError("vector has non-finite entries", record)
    return v


@dataclass(frozen=True)
class NormSpace:
    """R^n with either the Euclidean norm or an l_p norm, 1 < p < inf."""

    dimension: int
    p: Optional[float] = None  # None means Euclidean

    def __post_init__(self):
        ok, error = self.validate()
        if not ok:
            raise InputError(error)

    def validate(self) -> Tuple[bool, Optional[str]]:
        """Check the space parameters. Returns (ok, error_message)."""
        if int(self.dimension) != self.dimension or self.dimension < 1:
            return False, f"dimension must be a positive integer, got {self.dimension}"
        if self.p is not None and not (1.0 < self.p < math.inf):
            return False, f"p must satisfy 1 < p < inf, got {self.p}"
        return True, None

    @classmethod
    def euclidean(cls, dimension: int) -> "NormSpace":
        return cls(dimension=dimension)

    @classmethod
    def lp(cls, dimension: int, p: float) -> "NormSpace":
        # p = 2 is the Euclidean norm
        if p == 2.0:
            return cls(dimension=dimension)
        return cls(dimension=dimension, p=float(p))

    @property
    def kind(self) -> str:
        return "euclidean" if self.p is None else "lp"

    @property
    def is_euclidean(self) -> bool:
        return self.p is None

    @property
    def exponent(self) -> float:
        return 2.0 if self.p is None else self.p

    @property
    def q(self) -> float:
        """Dual exponent with 1/p + 1/q = 1."""
        p = self.exponent
        return p / (p - 1.0)

    def dual(self) -> "NormSpace":
        if self.p is None:
            return self
        return NormSpace(dimension=self.dimension, p=self.q)

    def norm(self, v) -> np.ndarray:
        """Norm along the last axis."""
        v = np.asarray(v, dtype=float)
        if self.p is None:
            return np.linalg.norm(v, axis=-1)
        return np.sum(np.abs(v) ** self.p, axis=-1) ** (1.0 / self.p)

    def to_dict(self) -> dict:
        if self.p is None:
            return {"kind": "euclidean"}
        return {"kind": "lp", "p": self.p}


@dataclass(eq=False)
class Polytope:
    """Convex hull of finitely many generators (not necessarily extreme)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[np.newaxis, :]
        if v.ndim != 2 or v.shape[0] == 0:
            raise InputError("polytope needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise InputError("polytope vertices must be finite")
        self.vertices = v

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def centroid(self) -> Vector:
        return self.vertices.mean(axis=0)

    def bounding_box(self) -> Tuple[Vector, Vector]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass
class DualFunctional:
    """Linear functional on R^n given by its coefficients."""

    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)

    def __call__(self, v) -> float:
        return float(np.dot(self.coefficients, v))

    def dual_norm(self, space: NormSpace) -> float:
        return float(space.dual().norm(self.coefficients))


def duality_map(u, space: NormSpace) -> DualFunctional:
    """Norming functional of u: unit in the dual norm with xi(u) = ||u||."""
    u = np.asarray(u, dtype=float)
    nu = float(space.norm(u))
    if nu == 0.0:
        raise DomainError("duality map is undefined at the zero vector")
    if space.is_euclidean:
        return DualFunctional(u / nu)
    p = space.p
    return DualFunctional(np.sign(u) * (np.abs(u) / nu) ** (p - 1.0))


def norm_gradient(u, space: NormSpace) -> np.ndarray:
    """Gradient of the norm at u != 0 (coefficients of the duality map)."""
    return duality_map(u, space).coefficients


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def _affine_minimizer(Q: np.ndarray) -> np.ndarray:
    """Weights (summing to 1) of the min-norm point of the affine hull of Q."""
    k = Q.shape[0]
    if k == 1:
        return np.ones(1)
    D = (Q[1:] - Q[0]).T
    beta, *_ = np.linalg.lstsq(D, -Q[0], rcond=None)
    return np.concatenate(([1.0 - beta.sum()], beta))


def min_norm_point(points: np.ndarray, tol: float = WOLFE_TOL,
                   max_iter: Optional[int] = None) -> Tuple[Vector, np.ndarray, list]:
    """
    Minimum-norm point of conv(points) by Wolfe's active-set iteration.

    Args:
        points: array of shape (m, n)
        tol: relative residual tolerance of the optimality test
        max_iter: major-cycle cap, defaults to 10 * n * m

    Returns:
        Tuple of (point, weights, support indices).
    """
    P = np.asarray(points, dtype=float)
    m, n = P.shape
    cap = max_iter or 10 * max(n, 1) * max(m, 1)
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(float(sq.max()), 1e-300)

    j = int(np.argmin(sq))
    support = [j]
    weights = np.ones(1)
    x = P[j].copy()
    gap = math.inf

    for _ in range(cap):
        dots = P @ x
        j = int(np.argmin(dots))
        gap = float(x @ x - dots[j])
        if gap <= tol * scale or j in support:
            return x, weights, support

        previous = list(support)
        support.append(j)
        weights = np.append(weights, 0.0)
        while True:
            alpha = _affine_minimizer(P[support])
            if np.all(alpha > WEIGHT_EPS):
                weights = alpha
                break
            # Move from the current weights towards alpha until one weight hits zero
            low = alpha <= WEIGHT_EPS
            denom = weights[low] - alpha[low]
            ratios = np.where(denom > 0, weights[low] / np.where(denom > 0, denom, 1.0), 0.0)
            theta = float(min(1.0, ratios.min()))
            weights = theta * alpha + (1.0 - theta) * weights
            keep = weights > WEIGHT_EPS
            if not np.any(keep):
                keep[int(np.argmax(weights))] = True
            support = [s for s, k in zip(support, keep) if k]
            weights = weights[keep]
            weights = weights / weights.sum()
        if sorted(support) == sorted(previous):
            # The new vertex was dropped straight away: no further descent possible
            x = weights @ P[support]
            return x, weights, support
        x = weights @ P[support]

    raise NumericalError("min-norm point iteration hit its cap", residual=gap / scale)


def _lp_distance(x: Vector, vertices: np.ndarray, space: NormSpace,
                 tol: float = LP_TOL, max_iter: int = 20000) -> Tuple[Vector, float]:
    """Accelerated projected-gradient descent over convex weights for the l_p distance."""
    diffs = x - vertices
    dists = space.norm(diffs)
    j = int(np.argmin(dists))
    if dists[j] == 0.0 or vertices.shape[0] == 1:
        return vertices[j].copy(), float(dists[j])

    def value_grad(lam):
        r = x - lam @ vertices
        nr = float(space.norm(r))
        if nr == 0.0:
            return 0.0, np.zeros_like(lam)
        return nr, -(vertices @ norm_gradient(r, space))

    lam = np.zeros(vertices.shape[0])
    lam[j] = 1.0
    y = lam.copy()
    t = 1.0
    step = 1.0 / max(float(np.max(np.sum(vertices ** 2, axis=1))), 1e-12)
    f, g = value_grad(lam)
    gap = math.inf
    for _ in range(max_iter):
        # Frank-Wolfe gap bounds f - f* from above
        gap = float(g @ lam - g.min())
        if f <= tol or gap <= tol:
            return lam @ vertices, f
        fy, gy = value_grad(y)
        while True:
            z = project_simplex(y - step * gy)
            fz, _ = value_grad(z)
            dz = z - y
            if fz <= fy + gy @ dz + (dz @ dz) / (2.0 * step) + 1e-15 or step < 1e-30:
                break
            step *= 0.5
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if fz > f:
            # Restart momentum on non-monotone steps
            y, t_next = z.copy(), 1.0
        else:
            y = z + ((t - 1.0) / t_next) * (z - lam)
        lam, t = z, t_next
        f, g = value_grad(lam)
        step *= 1.5
    raise NumericalError("l_p distance descent hit its cap", residual=gap)


def project_polytope(x, P: Polytope, space: Optional[NormSpace] = None) -> Tuple[Vector, float]:
    """
    Nearest point of a polytope and the distance to it.

    For the Euclidean norm the projection is exact up to the Wolfe tolerance;
    for l_p norms the returned point is a minimizer to within the descent
    tolerance and only the distance is certified.

    Returns:
        Tuple of (projection, distance).
    """
    x = np.asarray(x, dtype=float)
    if len(P) == 0:
        raise InputError("cannot project onto an empty polytope")
    vertices = np.unique(P.vertices, axis=0)
    if space is None or space.is_euclidean:
        point, _, _ = min_norm_point(vertices - x)
        return x + point, float(np.linalg.norm(point))
    return _lp_distance(x, vertices, space)


def polytope_distance(x, P: Polytope, space: Optional[NormSpace] = None) -> float:
    return project_polytope(x, P, space)[1]


def unit_directions(count: int, dimension: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed unit vectors."""
    g = rng.standard_normal((count, dimension))
    n = np.linalg.norm(g, axis=1, keepdims=True)
    n[n == 0] = 1.0
    return g / n


def parallel_map(fn, items: Sequence, threads: int = 1) -> list:
    """Order-preserving map, on a thread pool when threads > 1."""
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def box_exit(origin: Vector, u: Vector, box: Tuple[Vector, Vector]) -> float:
    """Ray parameter at which origin + t * u leaves an axis-aligned box."""
    low, high = (np.asarray(b, dtype=float) for b in box)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_high = np.where(u > 0, (high - origin) / u, np.inf)
        t_low = np.where(u < 0, (low - origin) / u, np.inf)
    return float(np.min(np.minimum(t_high, t_low)))
