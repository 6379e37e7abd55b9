"""Discrete Legendre transforms and convex-envelope evaluation."""

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator

from .errors import BackendDisagreementError, InputError, NumericalError
from .geometry import NormSpace, norm_gradient
from .modulus import ModulusCalculus

logger = logging.getLogger(__name__)

GRID_MAX_DIMENSION = 3
DIRECT_MAX_DIMENSION = 8

# SLSQP keeps solver state between reverse-communication calls
_SLSQP_LOCK = threading.Lock()


@dataclass(eq=False)
class GridFunction:
    """Values of a function on the lattice of an axis-aligned box."""

    low: np.ndarray
    high: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.low.shape[0] or self.high.shape != self.low.shape:
            raise InputError("grid box and value array disagree in dimension")
        if any(r < 2 for r in self.values.shape):
            raise InputError("grid resolution must be at least 2 per axis")
        if np.any(self.high <= self.low):
            raise InputError("grid box must have positive extent on every axis")
        if not np.all(np.isfinite(self.values)):
            raise InputError("grid values must be finite")

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> Tuple[int, ...]:
        return self.values.shape

    def axes(self) -> list:
        return [np.linspace(lo, hi, r) for lo, hi, r in zip(self.low, self.high, self.resolution)]

    @property
    def spacing(self) -> np.ndarray:
        return (self.high - self.low) / (np.asarray(self.resolution) - 1)

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.spacing))

    @classmethod
    def from_function(cls, fn, low, high, resolution: Sequence[int]) -> "GridFunction":
        """Sample fn (vectorized over rows) on the lattice."""
        low = np.atleast_1d(np.asarray(low, dtype=float))
        high = np.atleast_1d(np.asarray(high, dtype=float))
        axes = [np.linspace(lo, hi, r) for lo, hi, r in zip(low, high, resolution)]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        values = np.asarray(fn(nodes), dtype=float).reshape(tuple(resolution))
        return cls(low, high, values)

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(tuple(self.axes()), self.values, bounds_error=False, fill_value=None)

    def dump(self, path: Path):
        """Plain-text dump: header lines, then row-major values."""
        with open(path, "w") as f:
            f.write("# convex-jets grid\n")
            f.write("low " + " ".join(repr(float(v)) for v in self.low) + "\n")
            f.write("high " + " ".join(repr(float(v)) for v in self.high) + "\n")
            f.write("resolution " + " ".join(str(r) for r in self.resolution) + "\n")
            flat = self.values.reshape(-1, self.resolution[-1])
            for row in flat:
                f.write(" ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path: Path) -> "GridFunction":
        lines = Path(path).read_text().splitlines()
        header = {}
        rows = []
        for line in lines:
            if not line.strip() or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key in ("low", "high", "resolution"):
                header[key] = rest.split()
            else:
                rows.append([float(v) for v in line.split()])
        resolution = tuple(int(r) for r in header["resolution"])
        values = np.asarray(rows, dtype=float).reshape(resolution)
        return cls(np.asarray(header["low"], float), np.asarray(header["high"], float), values)


def lower_hull_1d(xs: np.ndarray, fs: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of (xs, fs), xs strictly increasing."""
    x = xs.tolist()
    f = fs.tolist()
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            # Drop k when it is on or above the chord from j to i
            if (f[k] - f[j]) * (x[i] - x[j]) >= (f[i] - f[j]) * (x[k] - x[j]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def lower_envelope_1d(xs: np.ndarray, fs: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Convex envelope of sampled 1D data, linearly interpolated at query points."""
    h = lower_hull_1d(xs, fs)
    return np.interp(query, xs[h], fs[h])


def legendre_1d(xs: np.ndarray, fs: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """max_i (s * xs[i] - fs[i]) for every s, through the lower hull (linear-time merge)."""
    h = lower_hull_1d(xs, fs)
    xh, fh = xs[h], fs[h]
    if len(h) == 1:
        return slopes * xh[0] - fh[0]
    edges = np.diff(fh) / np.diff(xh)
    idx = np.searchsorted(edges, slopes, side="left")
    return slopes * xh[idx] - fh[idx]


def _slope_range(f: GridFunction, axis: int) -> Tuple[float, float]:
    d = np.diff(f.values, axis=axis) / f.spacing[axis]
    lo, hi = float(d.min()), float(d.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def discrete_legendre(f: GridFunction, dual_low=None, dual_high=None,
                      dual_resolution: Optional[Sequence[int]] = None) -> GridFunction:
    """
    f*(xi) = max over lattice nodes x of <xi, x> - f(x), on a dual lattice.

    The transform factorizes axis by axis; each 1D pass runs through a lower
    hull. The default dual box spans the difference quotients of f per axis.
    """
    n = f.dimension
    if dual_low is None or dual_high is None:
        ranges = [_slope_range(f, k) for k in range(n)]
        dual_low = np.array([r[0] for r in ranges]) if dual_low is None else dual_low
        dual_high = np.array([r[1] for r in ranges]) if dual_high is None else dual_high
    dual_low = np.atleast_1d(np.asarray(dual_low, dtype=float))
    dual_high = np.atleast_1d(np.asarray(dual_high, dtype=float))
    resolution = tuple(dual_resolution) if dual_resolution is not None else f.resolution
    primal_axes = f.axes()
    dual_axes = [np.linspace(lo, hi, r) for lo, hi, r in zip(dual_low, dual_high, resolution)]

    # u holds -(partial transform); start with u = f
    u = f.values.copy()
    for k in range(n):
        moved = np.moveaxis(u, k, -1)
        lead = moved.shape[:-1]
        rows = moved.reshape(-1, moved.shape[-1])
        out = np.empty((rows.shape[0], len(dual_axes[k])))
        for i, row in enumerate(rows):
            out[i] = -legendre_1d(primal_axes[k], row, dual_axes[k])
        u = np.moveaxis(out.reshape(lead + (len(dual_axes[k]),)), -1, k)
    return GridFunction(dual_low, dual_high, -u)


def biconjugate(f: GridFunction) -> GridFunction:
    """Discrete convex envelope of f on its own lattice."""
    return discrete_legendre(discrete_legendre(f), f.low, f.high, f.resolution)


@dataclass(eq=False)
class MinimumOfPieces:
    """
    g(x) = min_i { v_i + <a_i, x - y_i> + c * phi(||x - y_i||) }.

    Each piece has the closed-form conjugate
    <xi, y_i> - v_i + c * phi*(||xi - a_i||_* / c).
    """

    centers: np.ndarray
    slopes: np.ndarray
    values: np.ndarray
    kernel: ModulusCalculus
    scale: float
    space: NormSpace

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.slopes = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if not (self.scale > 0):
            raise InputError("piece scale must be positive")

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def __len__(self) -> int:
        return self.centers.shape[0]

    def piece_values(self, x) -> np.ndarray:
        """Matrix of piece values, shape (k, m), for query rows x."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((X.shape[0], len(self)))
        for i in range(len(self)):
            d = X - self.centers[i]
            out[:, i] = (self.values[i] + d @ self.slopes[i]
                         + self.scale * np.asarray(self.kernel.phi(self.space.norm(d))))
        return out

    def __call__(self, x):
        X = np.asarray(x, dtype=float)
        rows = np.atleast_2d(X)
        best = np.full(rows.shape[0], np.inf)
        for i in range(len(self)):
            d = rows - self.centers[i]
            val = self.values[i] + d @ self.slopes[i] + self.scale * np.asarray(self.kernel.phi(self.space.norm(d)))
            np.minimum(best, val, out=best)
        return float(best[0]) if X.ndim == 1 else best

    def argmin_piece(self, x) -> int:
        return int(np.argmin(self.piece_values(x)[0]))

    def conjugate_terms(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        dual = self.space.dual()
        s = dual.norm(xi - self.slopes)
        return self.centers @ xi - self.values + np.asarray(self.kernel.scaled_phi_conjugate(s, self.scale))

    def conjugate(self, xi) -> float:
        return float(np.max(self.conjugate_terms(xi)))

    def conjugate_jacobian(self, xi) -> np.ndarray:
        """Row i is the gradient of the i-th conjugate term."""
        xi = np.asarray(xi, dtype=float)
        dual = self.space.dual()
        jac = self.centers.copy()
        diff = xi - self.slopes
        s = dual.norm(diff)
        for i in np.nonzero(s > 0)[0]:
            jac[i] += float(self.kernel.omega_inverse(s[i] / self.scale)) * norm_gradient(diff[i], dual)
        return jac

    def lipschitz_bound(self, low, high) -> float:
        """Upper bound for ||grad g|| over the box."""
        corners = np.stack([low, high])
        reach = 0.0
        for c in self.centers:
            far = np.where(np.abs(corners[0] - c) > np.abs(corners[1] - c), corners[0], corners[1])
            reach = max(reach, float(self.space.norm(far - c)))
        slope = float(np.max(self.space.dual().norm(self.slopes)))
        return slope + self.scale * float(self.kernel.omega(reach))


@dataclass
class DirectConcaveMax:
    """conv(g)(x) = max_xi <x, xi> - g*(xi), solved as a smooth epigraph program."""

    tol: float = 1e-10
    max_iter: int = 10000
    kind: str = field(default="direct", init=False)

    def maximizer(self, g: MinimumOfPieces, x) -> Tuple[float, np.ndarray]:
        """Returns (value, maximizing xi); xi is the gradient of conv(g) at x."""
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        if n > DIRECT_MAX_DIMENSION:
            raise InputError(f"direct envelope backend supports n <= {DIRECT_MAX_DIMENSION}")
        xi0 = g.slopes[g.argmin_piece(x)].copy()
        z0 = np.concatenate((xi0, [g.conjugate(xi0)]))
        m = len(g)

        def objective(z):
            return z[-1] - x @ z[:n]

        def objective_grad(z):
            return np.concatenate((-x, [1.0]))

        def constraint(z):
            return z[-1] - g.conjugate_terms(z[:n])

        def constraint_jac(z):
            return np.hstack((-g.conjugate_jacobian(z[:n]), np.ones((m, 1))))

        def solve(start):
            with _SLSQP_LOCK:
                return optimize.minimize(
                    objective, start, jac=objective_grad, method="SLSQP",
                    constraints=[{"type": "ineq", "fun": constraint, "jac": constraint_jac}],
                    options={"ftol": self.tol * 1e-2, "maxiter": self.max_iter},
                )

        result = solve(z0)
        if result.status not in (0, 8, 9):
            logger.warning("SLSQP status %d at %s: %s; restarting from its last iterate",
                           result.status, x, result.message)
            result = solve(result.x)
            if result.status not in (0, 8, 9):
                raise NumericalError(f"envelope inner maximization failed twice ({result.message})",
                                     residual=float(np.max(-constraint(result.x), initial=0.0)))
        if result.status == 9:
            raise NumericalError("envelope inner maximization hit its iteration cap",
                                 residual=float(np.max(-constraint(result.x), initial=0.0)))
        candidates = [xi0, result.x[:n]]
        values = [float(x @ c - g.conjugate(c)) for c in candidates]
        best = int(np.argmax(values))
        return values[best], candidates[best]

    def evaluate(self, g: MinimumOfPieces, x) -> float:
        return self.maximizer(g, x)[0]

    def gradient(self, g: MinimumOfPieces, x) -> np.ndarray:
        return self.maximizer(g, x)[1]

    def to_dict(self) -> dict:
        return {"kind": "direct", "tol": self.tol, "max_iter": self.max_iter}


@dataclass
class GridBiconjugate:
    """conv(g) as the double discrete Legendre transform on a box lattice."""

    low: np.ndarray
    high: np.ndarray
    resolution: int = 513
    kind: str = field(default="grid", init=False)

    def __post_init__(self):
        self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
        self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        if self.low.shape[0] > GRID_MAX_DIMENSION:
            raise InputError(f"grid envelope backend supports n <= {GRID_MAX_DIMENSION}")
        self._lock = threading.Lock()
        self._prepared = {}

    @property
    def spacing(self) -> np.ndarray:
        return (self.high - self.low) / (self.resolution - 1)

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def prepare(self, g: MinimumOfPieces) -> GridFunction:
        """Build (once per g) the biconjugate grid."""
        with self._lock:
            entry = self._prepared.get(id(g))
            if entry is None or entry[0] is not g:
                shape = (self.resolution,) * self.low.shape[0]
                grid = GridFunction.from_function(g, self.low, self.high, shape)
                env = biconjugate(grid)
                entry = (g, env, env.interpolator())
                self._prepared[id(g)] = entry
                logger.info("prepared %s envelope grid", "x".join(str(r) for r in shape))
            return entry[1]

    def evaluate(self, g: MinimumOfPieces, x) -> float:
        self.prepare(g)
        interp = self._prepared[id(g)][2]
        return float(interp(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def gradient(self, g: MinimumOfPieces, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grad = np.empty_like(x)
        for k, h in enumerate(self.spacing):
            e = np.zeros_like(x)
            e[k] = h
            grad[k] = (self.evaluate(g, x + e) - self.evaluate(g, x - e)) / (2.0 * h)
        return grad

    def to_dict(self) -> dict:
        return {"kind": "grid", "low": self.low.tolist(), "high": self.high.tolist(), "resolution": self.resolution}


EnvelopeBackend = Union[DirectConcaveMax, GridBiconjugate]


def backend_from_dict(spec: dict) -> EnvelopeBackend:
    kind = spec.get("kind", "direct")
    if kind == "direct":
        return DirectConcaveMax(tol=float(spec.get("tol", 1e-10)), max_iter=int(spec.get("max_iter", 10000)))
    if kind == "grid":
        return GridBiconjugate(np.asarray(spec["low"], float), np.asarray(spec["high"], float),
                               int(spec.get("resolution", 513)))
    raise InputError(f"unknown envelope backend {kind!r}", "backend")


def agreement_tolerance(g: MinimumOfPieces, grid: GridBiconjugate) -> float:
    """max(1e-4, 2 * cell diameter * local Lipschitz bound)."""
    return max(1e-4, 2.0 * grid.cell_diameter * g.lipschitz_bound(grid.low, grid.high))


def convex_envelope_eval(g: MinimumOfPieces, x, backend: EnvelopeBackend,
                         check: Optional[EnvelopeBackend] = None, tolerance: Optional[float] = None) -> float:
    """
    conv(g)(x) with the chosen backend, optionally cross-checked by a second one.

    Raises:
        BackendDisagreementError: the two backends differ by more than the tolerance.
    """
    value = backend.evaluate(g, x)
    if check is None:
        return value
    other = check.evaluate(g, x)
    if tolerance is None:
        grid = backend if isinstance(backend, GridBiconjugate) else check
        tolerance = agreement_tolerance(g, grid) if isinstance(grid, GridBiconjugate) else 1e-8
    if abs(value - other) > tolerance:
        raise BackendDisagreementError(np.asarray(x, dtype=float), value, other, tolerance)
    return value


def default_grid_resolution(dimension: int, resolution_2d: int = 513, resolution_3d: int = 65) -> int:
    return resolution_3d if dimension >= 3 else resolution_2d
