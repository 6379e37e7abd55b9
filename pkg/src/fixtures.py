"""Deterministic tangency-data generators used by the tests and the CLI."""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import InputError
from .feasibility import TangencyProblem
from .geometry import NormSpace, unit_directions
from .modulus import ModulusCalculus


def _unit_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / count)
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.column_stack((np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)))


def gen_sphere_data(n_points: int, dimension: int = 2, radius: float = 1.0, seed: int = 0) -> TangencyProblem:
    """
    Points on the sphere of the given radius with normals x / ||x||.

    Circles use equally spaced angles, spheres in R^3 a Fibonacci lattice and
    higher dimensions seeded random directions.
    """
    if n_points < 1:
        raise InputError("n_points must be at least 1")
    if dimension == 1:
        directions = np.array([[1.0], [-1.0]])[: min(n_points, 2)]
    elif dimension == 2:
        angles = 2.0 * math.pi * np.arange(n_points) / n_points
        directions = np.column_stack((np.cos(angles), np.sin(angles)))
    elif dimension == 3:
        directions = _fibonacci_sphere(n_points)
    else:
        directions = unit_directions(n_points, dimension, np.random.default_rng(seed))
    directions = _unit_rows(directions)
    return TangencyProblem(NormSpace.euclidean(dimension), radius * directions, directions)


def cusp_parameters(h_min: float, h_max: float, count: int) -> np.ndarray:
    """Symmetric parameters: 0 and +-t for count geometric steps from h_min to h_max."""
    if not (0.0 < h_min < h_max <= 2.0):
        raise InputError("need 0 < h_min < h_max <= 2")
    positive = np.geomspace(h_min, h_max, max(count, 1))
    return np.concatenate((-positive[::-1], [0.0], positive))


def gen_cusp_curve_data(h_min: float, h_max: float, count: int) -> TangencyProblem:
    """
    Samples of the convex curve y = |t|^(3/2) - 1 with outward (downward) normals.

    The curve is C^{1,1/2} but not C^{1,1} at t = 0, where the normal is (0, -1).
    """
    t = cusp_parameters(h_min, h_max, count)
    points = np.column_stack((t, np.abs(t) ** 1.5 - 1.0))
    normals = np.column_stack((1.5 * np.sqrt(np.abs(t)) * np.sign(t), -np.ones_like(t)))
    return TangencyProblem(NormSpace.euclidean(2), points, _unit_rows(normals))


def gen_random_convex_data(kind: str, n_points: int, noise: float = 0.0, seed: int = 0,
                           axes: Optional[Tuple[float, ...]] = None) -> TangencyProblem:
    """
    Random points on an ellipse, an ellipsoid or a sphere with exact outward normals.

    noise > 0 perturbs every normal by a Gaussian of that size before
    renormalizing, which drives the data towards infeasibility.
    """
    if noise < 0:
        raise InputError("noise must be >= 0")
    if n_points < 1:
        raise InputError("n_points must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "ellipse":
        a = np.asarray(axes or (2.0, 1.0), dtype=float)
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n_points))
        directions = np.column_stack((np.cos(angles), np.sin(angles)))
    elif kind == "ellipsoid":
        a = np.asarray(axes or (3.0, 2.0, 1.0), dtype=float)
        directions = unit_directions(n_points, a.shape[0], rng)
    elif kind == "sphere":
        dimension = len(axes) if axes else 3
        a = np.asarray(axes or (1.0,) * dimension, dtype=float)
        directions = unit_directions(n_points, a.shape[0], rng)
    else:
        raise InputError(f"unknown body kind {kind!r}")
    if directions.shape[1] != a.shape[0] or np.any(a <= 0):
        raise InputError("axes must be positive and match the body dimension")
    points = directions * a
    normals = _unit_rows(points / a ** 2)
    if noise > 0:
        normals = _unit_rows(normals + noise * rng.standard_normal(normals.shape))
    return TangencyProblem(NormSpace.euclidean(a.shape[0]), points, normals)


def min_curvature_radius(axes: Tuple[float, float]) -> float:
    """Smallest radius of curvature of the ellipse with semi-axes (a, b): min(b^2/a, a^2/b)."""
    a, b = axes
    return min(b * b / a, a * a / b)


def gen_stadium_data(n_points: int, half_length: float = 1.0, radius: float = 1.0) -> TangencyProblem:
    """Boundary of the segment [-half_length, half_length] x {0} thickened by a disc."""
    if n_points < 4:
        raise InputError("n_points must be at least 4")
    perimeter = 4.0 * half_length + 2.0 * math.pi * radius
    s = perimeter * np.arange(n_points) / n_points
    points, normals = [], []
    straight = 2.0 * half_length
    arc = math.pi * radius
    for v in s:
        if v < straight:
            points.append((-half_length + v, -radius))
            normals.append((0.0, -1.0))
        elif v < straight + arc:
            theta = -math.pi / 2 + (v - straight) / radius
            normals.append((math.cos(theta), math.sin(theta)))
            points.append((half_length + radius * math.cos(theta), radius * math.sin(theta)))
        elif v < 2 * straight + arc:
            points.append((half_length - (v - straight - arc), radius))
            normals.append((0.0, 1.0))
        else:
            theta = math.pi / 2 + (v - 2 * straight - arc) / radius
            normals.append((math.cos(theta), math.sin(theta)))
            points.append((-half_length + radius * math.cos(theta), radius * math.sin(theta)))
    return TangencyProblem(NormSpace.euclidean(2), np.asarray(points), np.asarray(normals))


def gen_opposing_normals() -> TangencyProblem:
    """Two data whose normals face each other: infeasible for every class."""
    return TangencyProblem(NormSpace.euclidean(2), [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0]])


def gen_single_datum(dimension: int = 1) -> TangencyProblem:
    point = np.zeros(dimension)
    normal = np.zeros(dimension)
    normal[-1] = 1.0
    return TangencyProblem(NormSpace.euclidean(dimension), [point], [normal])


def gen_lp_sphere_data(n_points: int, p: float, seed: int = 0) -> TangencyProblem:
    """Points on the unit l_p circle with their unit dual functionals D(x) = J_p(x)."""
    space = NormSpace.lp(2, p)
    angles = 2.0 * math.pi * (np.arange(n_points) + 0.25) / n_points
    directions = np.column_stack((np.cos(angles), np.sin(angles)))
    points = directions / space.norm(directions)[:, np.newaxis]
    duals = np.sign(points) * np.abs(points) ** (space.exponent - 1.0)
    duals = duals / space.dual().norm(duals)[:, np.newaxis]
    return TangencyProblem(space, points, duals, dual=not space.is_euclidean)


@dataclass
class FixtureSpec:
    """A named generator with its parameters."""

    name: str
    params: dict = field(default_factory=dict)

    def generate(self) -> TangencyProblem:
        generator = GENERATORS.get(self.name)
        if generator is None:
            raise InputError(f"unknown fixture {self.name!r}; choose from {', '.join(sorted(GENERATORS))}")
        try:
            return generator(**self.params)
        except TypeError as e:
            raise InputError(f"bad parameters for fixture {self.name!r}: {e}")

    def write(self, path: Path, modulus: Optional[ModulusCalculus] = None, construction: Optional[dict] = None):
        """Emit the generated data as a problem file."""
        from .serialization import save_problem

        save_problem(path, self.generate(), modulus, construction)


GENERATORS = {
    "sphere": gen_sphere_data,
    "cusp": gen_cusp_curve_data,
    "random": gen_random_convex_data,
    "stadium": gen_stadium_data,
    "opposing": gen_opposing_normals,
    "single": gen_single_datum,
    "lp_sphere": gen_lp_sphere_data,
}
