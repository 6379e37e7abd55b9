"""
Sampled verification of the regularity characterizations of constructed bodies.

Every check becomes a PropertyRecord; a record passes when its worst margin
is >= -tolerance. Sup-type constants are sampled lower bounds of the true
suprema, so records carry the sample count they were measured with.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .body_c11 import BodyC11
from .body_c1omega import BodyC1Omega, DualAlpha
from .config import Config
from .errors import ConvexJetsError, InputError
from .feasibility import TangencyProblem
from .geometry import NormSpace, box_exit, norm_gradient, parallel_map, unit_directions
from .modulus import ModulusCalculus

logger = logging.getLogger(__name__)

MIN_SEPARATION = 1e-9
MAX_WITNESSES = 5
NORMAL_TOL = 1e-7
FD_STEP_GRADIENT = 1e-5
FD_STEP_GAUGE = 1e-4
VALUE_TOL = 1e-5
GRADIENT_TOL = 1e-4
# Differential gaps below this are solver noise, not geometry
DIFFERENTIAL_FLOOR = 1e-5
SMOOTHNESS_SCALES = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
SMOOTHNESS_GROWTH = 1.05

DISTANCE_TERM = "distance_term"
DISTANCE_TERM_STATEMENT = "phi(d_A(x+h)) + phi(d_A(x-h)) - 2 phi(d_A(x)) <= phi(2||h||)"
NORM_SMOOTHNESS = "norm_smoothness"
NORM_SMOOTHNESS_STATEMENT = "||x+h||^(1+a) + ||x-h||^(1+a) - 2||x||^(1+a) <= L ||h||^(1+a)"


@dataclass(frozen=True)
class Tolerances:
    """Tolerance ladder for exact identities, finite differences and sampled constants."""

    exact: float = 1e-9
    finite_difference: float = 1e-5
    lipschitz: float = 1e-3
    convexity: float = 1e-10

    @classmethod
    def from_config(cls, config: Config) -> "Tolerances":
        return cls(
            exact=config.exact_tol,
            finite_difference=config.finite_difference_tol,
            lipschitz=config.lipschitz_tol,
            convexity=config.convexity_tol,
        )

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "finite_difference": self.finite_difference,
            "lipschitz": self.lipschitz,
            "convexity": self.convexity,
        }


@dataclass
class PropertyRecord:
    """Outcome of one sampled property."""

    name: str
    statement: str
    samples: int
    worst_margin: float
    tolerance: float
    measured: Optional[float] = None
    bound: Optional[float] = None
    witnesses: List[list] = field(default_factory=list)
    skipped: Optional[str] = None
    refined: Optional[float] = None

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return self.worst_margin >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statement": self.statement,
            "samples": self.samples,
            "worst_margin": _number(self.worst_margin),
            "tolerance": self.tolerance,
            "measured": _number(self.measured),
            "bound": _number(self.bound),
            "refined": _number(self.refined),
            "passed": self.passed,
            "skipped": self.skipped,
            "witnesses": self.witnesses,
        }


@dataclass
class VerificationReport:
    """All property records for one body, seed and sample count."""

    body_kind: str
    seed: int
    samples: int
    tolerances: Tolerances
    properties: List[PropertyRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def failing(self) -> List[str]:
        return [p.name for p in self.properties if not p.passed]

    def get(self, name: str) -> PropertyRecord:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "body_kind": self.body_kind,
            "seed": self.seed,
            "samples": self.samples,
            "tolerances": self.tolerances.to_dict(),
            "passed": self.passed,
            "failing": self.failing(),
            "properties": [p.to_dict() for p in self.properties],
        }


def _number(value):
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _point(x) -> list:
    return [float(v) for v in np.asarray(x).ravel()]


def _witness_margin(margins: np.ndarray, points: List, tolerance: float) -> Tuple[float, List[list]]:
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return math.inf, []
    bad = np.nonzero(margins < -tolerance)[0]
    order = bad[np.argsort(margins[bad])][:MAX_WITNESSES]
    return float(margins.min()), [_point(points[i]) for i in order]


def _pairwise_max(P: np.ndarray, Q: np.ndarray, denominator: Callable[[np.ndarray], np.ndarray],
                  norm=np.linalg.norm) -> Tuple[float, Optional[Tuple[int, int]]]:
    """max over pairs of ||Q_i - Q_j|| / denominator(||P_i - P_j||)."""
    best, pair = 0.0, None
    for i in range(len(P) - 1):
        d = norm(P[i + 1:] - P[i], axis=1)
        keep = np.nonzero(d > MIN_SEPARATION)[0]
        if keep.size == 0:
            continue
        ratio = norm(Q[i + 1:][keep] - Q[i], axis=1) / denominator(d[keep])
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, pair = float(ratio[k]), (i, i + 1 + int(keep[k]))
    return best, pair


def _central_difference(fn, x: np.ndarray, h: float) -> np.ndarray:
    grad = np.empty_like(x)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        grad[k] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return grad


def _attach_refined(report: VerificationReport, refined: VerificationReport):
    for record in report.properties:
        try:
            other = refined.get(record.name)
        except KeyError:
            continue
        record.refined = other.measured


# -- C^{1,1} bodies ---------------------------------------------------------------


def verify_c11(body: BodyC11, samples: int, seed: int, tolerances: Tolerances = Tolerances(),
               rolling_radius: Optional[float] = None, ball_samples: int = 64,
               threads: int = 1, refine: bool = False) -> VerificationReport:
    """
    Interpolation, Gauss-map Lipschitz bound, rolling balls, the normal
    inequality and gauge regularity for a C^{1,1} body.

    The rolling-ball radius defaults to 0.99 * radius.
    """
    r = body.radius
    rolling = 0.99 * r if rolling_radius is None else float(rolling_radius)
    report = VerificationReport("c11", seed, samples, tolerances)
    boundary = body.sample_boundary(samples, seed)
    normals = parallel_map(body.distance_gradient, boundary, threads)
    S = np.asarray(boundary)
    NS = np.asarray(normals)

    problem = body.source
    if problem is not None:
        report.properties.append(_c11_interpolation(body, problem, tolerances))

    lip, pair = _pairwise_max(S, NS, lambda d: d)
    bound = 1.0 / r
    report.properties.append(PropertyRecord(
        name="gauss_map_lipschitz",
        statement="||N(s) - N(t)|| <= ||s - t|| / r on sampled boundary pairs",
        samples=len(S),
        worst_margin=bound - lip,
        tolerance=tolerances.lipschitz,
        measured=lip,
        bound=bound,
        witnesses=[_point(S[pair[0]]), _point(S[pair[1]])] if pair and lip > bound + tolerances.lipschitz else [],
    ))

    report.properties.append(_rolling_ball(body, S, NS, rolling, ball_samples, seed, tolerances, threads))
    report.properties.append(_normal_inequality(body, S, NS, tolerances))
    report.properties.append(_gauge_regularity(body, S, seed, tolerances, threads))

    if refine:
        _attach_refined(report, verify_c11(body, 2 * samples, seed, tolerances, rolling_radius,
                                           ball_samples, threads, refine=False))
    logger.info("c11 verification: %s", "pass" if report.passed else f"fail {report.failing()}")
    return report


def _c11_interpolation(body: BodyC11, problem: TangencyProblem, tolerances: Tolerances) -> PropertyRecord:
    margins, points = [], []
    for y, n in zip(problem.points, problem.unit_normals):
        b = body.signed_distance(y)
        margin = tolerances.exact - abs(b)
        if abs(b) <= tolerances.exact:
            try:
                margin = min(margin, NORMAL_TOL - float(np.linalg.norm(body.boundary_normal(y) - n)))
            except ConvexJetsError:
                margin = -math.inf
        margins.append(margin)
        points.append(y)
    worst, witnesses = _witness_margin(np.asarray(margins), points, 0.0)
    return PropertyRecord(
        name="interpolation",
        statement="every datum lies on the boundary with the prescribed normal",
        samples=len(points),
        worst_margin=worst,
        tolerance=0.0,
        witnesses=witnesses,
    )


def _rolling_ball(body: BodyC11, S: np.ndarray, NS: np.ndarray, rolling: float, ball_samples: int,
                  seed: int, tolerances: Tolerances, threads: int) -> PropertyRecord:
    """Balls of radius `rolling` touching at boundary samples and at the data must lie in the body."""
    rng = np.random.default_rng(seed + 1)
    sphere = unit_directions(ball_samples, body.dimension, rng)
    touches = list(zip(S, NS))
    on_data = [False] * len(touches)
    if body.source is not None:
        touches += list(zip(body.source.points, body.source.unit_normals))
        on_data += [True] * len(body.source)

    def margin(item):
        (s, n), datum = item
        centre = s - rolling * n
        worst = -max(body.signed_distance(centre + rolling * u) for u in sphere)
        if datum:
            # The touching point itself must be a boundary point
            worst = min(worst, tolerances.exact - abs(body.signed_distance(s)))
        return worst

    margins = np.asarray(parallel_map(margin, list(zip(touches, on_data)), threads))
    worst, witnesses = _witness_margin(margins, [t[0] for t in touches], tolerances.exact)
    return PropertyRecord(
        name="rolling_ball",
        statement=f"B(s - r' N(s), r') lies in the body and touches it at s, r' = {rolling:.12g}",
        samples=len(touches) * ball_samples,
        worst_margin=worst,
        tolerance=tolerances.exact,
        measured=rolling,
        witnesses=witnesses,
    )


def _normal_inequality(body: BodyC11, S: np.ndarray, NS: np.ndarray, tolerances: Tolerances) -> PropertyRecord:
    """<N(y), y - x> >= r/2 ||N(x) - N(y)||^2 on sampled boundary pairs."""
    r = body.radius
    own = np.einsum("ij,ij->i", NS, S)
    lhs = own[np.newaxis, :] - S @ NS.T
    dn2 = np.sum((NS[:, np.newaxis, :] - NS[np.newaxis, :, :]) ** 2, axis=-1)
    dist = np.linalg.norm(S[:, np.newaxis, :] - S[np.newaxis, :, :], axis=-1)
    margins = (lhs - 0.5 * r * dn2) / (1.0 + dist)
    np.fill_diagonal(margins, math.inf)
    i, j = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst = float(margins[i, j]) if len(S) > 1 else math.inf
    return PropertyRecord(
        name="normal_inequality",
        statement="<N(y), y - x> >= (r/2) ||N(x) - N(y)||^2 on sampled boundary pairs",
        samples=len(S) * (len(S) - 1),
        worst_margin=worst,
        tolerance=NORMAL_TOL,
        witnesses=[_point(S[i]), _point(S[j])] if worst < -NORMAL_TOL else [],
    )


def _gauge_regularity(body: BodyC11, S: np.ndarray, seed: int, tolerances: Tolerances,
                      threads: int) -> PropertyRecord:
    """Closed-form gauge gradient against finite differences on {mu >= 1/2}, plus its measured Lipschitz constant."""
    name = "gauge_regularity"
    statement = "grad mu matches finite differences and is Lipschitz on {mu >= 1/2}"
    if body.source is None:
        return PropertyRecord(name, statement, 0, math.inf, tolerances.finite_difference, skipped="no data")
    origin = body.source.points.mean(axis=0)
    if not body.signed_distance(origin) < -1e-6:
        logger.info("gauge check skipped: data centroid is not interior")
        return PropertyRecord(name, statement, 0, math.inf, tolerances.finite_difference,
                              skipped="data centroid is not an interior point")
    rng = np.random.default_rng(seed + 6)
    levels = rng.uniform(0.5, 1.5, len(S))
    X = origin + levels[:, np.newaxis] * (S - origin)

    def errors(x):
        exact = body.gauge_gradient(x, origin)
        fd = _central_difference(lambda p: body.gauge(p, origin), x, FD_STEP_GAUGE)
        return exact, float(np.linalg.norm(exact - fd))

    results = parallel_map(errors, list(X), threads)
    grads = np.asarray([g for g, _ in results])
    errs = np.asarray([e for _, e in results])
    lip, _ = _pairwise_max(X, grads, lambda d: d)
    worst, witnesses = _witness_margin(tolerances.finite_difference - errs, list(X), 0.0)
    return PropertyRecord(
        name=name,
        statement=statement,
        samples=len(X),
        worst_margin=worst,
        tolerance=0.0,
        measured=lip,
        witnesses=witnesses,
    )


def verify_signed_distance(body: BodyC11, epsilon: float, samples: int, seed: int,
                           tolerances: Tolerances = Tolerances(), threads: int = 1,
                           refine: bool = False) -> VerificationReport:
    """
    Projection identity, projection monotonicity, differentiability,
    gradient Lipschitz bound and convexity of b_V on
    U_eps = {b_V >= -(1 - eps) r}.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    r = body.radius
    report = VerificationReport("c11_signed_distance", seed, samples, tolerances)
    boundary = np.asarray(body.sample_boundary(samples, seed))
    normals = np.asarray(parallel_map(body.distance_gradient, list(boundary), threads))
    rng = np.random.default_rng(seed + 2)
    depth = rng.uniform(-(1.0 - epsilon) * r, r, len(boundary))
    X = boundary + depth[:, np.newaxis] * normals

    def local(x):
        b = body.signed_distance(x)
        p = body.project_boundary(x)
        n = body.boundary_normal(p, tol=1e-8)
        fd = _central_difference(body.signed_distance, x, FD_STEP_GRADIENT)
        return b, p, n, fd

    results = parallel_map(local, list(X), threads)
    B = np.asarray([b for b, _, _, _ in results])
    P = np.asarray([p for _, p, _, _ in results])
    N = np.asarray([n for _, _, n, _ in results])
    FD = np.asarray([fd for _, _, _, fd in results])

    profile = tolerances.exact - np.abs(B - depth)
    worst, witnesses = _witness_margin(profile, list(X), 0.0)
    report.properties.append(PropertyRecord(
        "distance_profile", "b_V(s + t N(s)) = t for t >= -(1 - eps) r", len(X), worst, 0.0, witnesses=witnesses))

    residual = np.linalg.norm(X - P - B[:, np.newaxis] * N, axis=1)
    worst, witnesses = _witness_margin(NORMAL_TOL - residual, list(X), 0.0)
    report.properties.append(PropertyRecord(
        "projection_identity", "x - P_S(x) = b_V(x) N_S(P_S(x))", len(X), worst, 0.0,
        measured=float(residual.max()), witnesses=witnesses))

    dP = P[:, np.newaxis, :] - P[np.newaxis, :, :]
    dX = X[:, np.newaxis, :] - X[np.newaxis, :, :]
    mono = np.einsum("ijk,ijk->ij", dP, dX) - epsilon * np.einsum("ijk,ijk->ij", dP, dP)
    mono = mono / (1.0 + np.linalg.norm(dX, axis=-1))
    np.fill_diagonal(mono, math.inf)
    i, j = np.unravel_index(int(np.argmin(mono)), mono.shape)
    worst = float(mono[i, j]) if len(X) > 1 else math.inf
    report.properties.append(PropertyRecord(
        "projection_monotonicity", "<P(x) - P(y), x - y> >= eps ||P(x) - P(y)||^2 on U_eps",
        len(X) * (len(X) - 1), worst, NORMAL_TOL,
        witnesses=[_point(X[i]), _point(X[j])] if worst < -NORMAL_TOL else []))

    fd_err = np.linalg.norm(FD - N, axis=1)
    worst, witnesses = _witness_margin(tolerances.finite_difference - fd_err, list(X), 0.0)
    report.properties.append(PropertyRecord(
        "gradient", "grad b_V = N_S o P_S (central differences)", len(X), worst, 0.0,
        measured=float(fd_err.max()), witnesses=witnesses))

    lip, pair = _pairwise_max(X, N, lambda d: d)
    bound = 1.0 / (epsilon * r)
    report.properties.append(PropertyRecord(
        "gradient_lipschitz", "lip(grad b_V, U_eps) <= 1 / (eps r)", len(X), bound - lip,
        tolerances.lipschitz, measured=lip, bound=bound,
        witnesses=[_point(X[pair[0]]), _point(X[pair[1]])] if pair and lip > bound + tolerances.lipschitz else []))

    report.properties.append(_convexity(body, samples, seed, tolerances, threads))

    if refine:
        _attach_refined(report, verify_signed_distance(body, epsilon, 2 * samples, seed, tolerances, threads))
    logger.info("signed-distance verification: %s", "pass" if report.passed else f"fail {report.failing()}")
    return report


def _convexity(body: BodyC11, samples: int, seed: int, tolerances: Tolerances, threads: int) -> PropertyRecord:
    low, high = body.centers.bounding_box()
    pad = 2.0 * body.radius
    rng = np.random.default_rng(seed + 3)
    count = max(samples, 2)
    A = rng.uniform(low - pad, high + pad, (count, body.dimension))
    B = rng.uniform(low - pad, high + pad, (count, body.dimension))

    def margin(pair):
        a, b = pair
        return 0.5 * (body.signed_distance(a) + body.signed_distance(b)) - body.signed_distance(0.5 * (a + b))

    margins = np.asarray(parallel_map(margin, list(zip(A, B)), threads))
    worst, witnesses = _witness_margin(margins, list(0.5 * (A + B)), tolerances.convexity)
    return PropertyRecord("convexity", "b_V((a+b)/2) <= (b_V(a) + b_V(b))/2", count, worst,
                          tolerances.convexity, witnesses=witnesses)


# -- C^{1,omega} bodies ------------------------------------------------------------


def verify_c1omega(body: BodyC1Omega, samples: int, seed: int, tolerances: Tolerances = Tolerances(),
                   threads: int = 1, refine: bool = False) -> VerificationReport:
    """
    Interpolation and minimum identities, the omega-Hoelder Gauss map,
    W_x inclusion, the normal inequality, the two-point inequality of the
    distance term (omega bodies) or the smoothness of the norm power
    (dual-alpha bodies), gradient pinching, coercivity and the pairwise
    condition recovered from the sampled boundary.
    """
    report = VerificationReport(body.variant.kind, seed, samples, tolerances)
    boundary = body.boundary_sample(samples, seed, threads=threads)
    evaluated = parallel_map(body.value_and_gradient, boundary, threads)
    S = np.asarray(boundary)
    G = np.asarray([g for _, g in evaluated])
    N = np.asarray([_unit_normal(body, g) for g in G])
    omega = body.gradient_modulus

    report.properties.append(_c1omega_interpolation(body, threads))
    report.properties.append(_minimum_identity(body))

    values = np.asarray([v for v, _ in evaluated])
    worst, witnesses = _witness_margin(1e-8 - np.abs(values - 1.0), boundary, 0.0)
    report.properties.append(PropertyRecord(
        "level_set", "boundary samples satisfy F = 1", len(S), worst, 0.0, witnesses=witnesses))

    D = G / np.asarray(body.space.dual().norm(G))[:, np.newaxis]
    gauss = check_gauss_map_modulus(body.space, omega, S, D, tolerances)
    report.properties.append(gauss)

    m_w = 2.0 * max(gauss.measured, 1e-12)
    if body.space.is_euclidean:
        report.properties.append(_w_inclusion(body, S, N, m_w, seed, tolerances, threads))
        report.properties.append(_omega_inequality(body, S, N, m_w))
    else:
        skip = "stated for the Euclidean norm"
        report.properties.append(PropertyRecord("w_inclusion", "W_x lies in V and meets S only at x", 0,
                                                math.inf, 0.0, skipped=skip))
        report.properties.append(PropertyRecord("normal_inequality", "pairwise omega inequality on S", 0,
                                                math.inf, 0.0, skipped=skip))

    if isinstance(body.variant, DualAlpha):
        report.properties.append(PropertyRecord(DISTANCE_TERM, DISTANCE_TERM_STATEMENT, 0, math.inf, 0.0,
                                                skipped="the distance term is d_A^(1+alpha)"))
        report.properties.append(check_norm_smoothness(body.space, body.variant.alpha, seed=seed,
                                                       tolerances=tolerances))
    else:
        report.properties.append(check_distance_term(body, samples, seed, threads))
        report.properties.append(PropertyRecord(NORM_SMOOTHNESS, NORM_SMOOTHNESS_STATEMENT, 0, math.inf, 0.0,
                                                skipped="needs the dual-alpha construction"))

    report.properties.append(_pinching(body, S, G, tolerances))
    report.properties.append(check_coercivity(body, min(samples, 100), seed, threads))
    if isinstance(body.variant, DualAlpha):
        report.properties.append(check_sampled_feasibility(body.space, S, D, alpha=body.variant.alpha))
    else:
        report.properties.append(check_sampled_feasibility(body.space, S, D, modulus=body.modulus))

    if refine:
        _attach_refined(report, verify_c1omega(body, 2 * samples, seed, tolerances, threads))
    logger.info("%s verification: %s", body.variant.kind, "pass" if report.passed else f"fail {report.failing()}")
    return report


def _unit_normal(body: BodyC1Omega, grad: np.ndarray) -> np.ndarray:
    if body.space.is_euclidean:
        return grad / np.linalg.norm(grad)
    return norm_gradient(grad, body.space.dual())


def _c1omega_interpolation(body: BodyC1Omega, threads: int) -> PropertyRecord:
    problem = body.source
    evaluated = parallel_map(body.value_and_gradient, list(problem.points), threads)
    margins = []
    for (v, g), d in zip(evaluated, problem.normals):
        margins.append(min(VALUE_TOL - abs(v - 1.0), GRADIENT_TOL - float(np.linalg.norm(g - d))))
    worst, witnesses = _witness_margin(np.asarray(margins), list(problem.points), 0.0)
    return PropertyRecord("interpolation", "F(y) = 1 and DF(y) = D(y) on every datum", len(problem),
                          worst, 0.0, witnesses=witnesses)


def _minimum_identity(body: BodyC1Omega) -> PropertyRecord:
    evaluated = [body.value_and_gradient(z) for z in body.z_points]
    values = np.asarray([v for v, _ in evaluated])
    grads = np.asarray([float(np.linalg.norm(g)) for _, g in evaluated])
    margins = np.minimum(VALUE_TOL - np.abs(values - body.inf_value), GRADIENT_TOL - grads)
    worst, witnesses = _witness_margin(margins, list(body.z_points), 0.0)
    return PropertyRecord("minimum_identity", "F(z_y) = inf F and grad F(z_y) = 0", len(values), worst, 0.0,
                          measured=float(values.min()), bound=body.inf_value, witnesses=witnesses)


def _w_radius(body: BodyC1Omega, slope: float, m_w: float) -> float:
    """Largest rho with rho * slope >= M phi(2 rho)."""
    phi = body.modulus.phi

    def gap(rho):
        return rho * slope - m_w * float(phi(2.0 * rho))

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
    lo = hi * 1e-12
    if gap(lo) <= 0:
        return 0.0
    return optimize.brentq(gap, lo, hi, xtol=1e-14)


def _w_inclusion(body: BodyC1Omega, S: np.ndarray, N: np.ndarray, m_w: float, seed: int,
                 tolerances: Tolerances, threads: int) -> PropertyRecord:
    """Points of W_x are in V, and no other boundary sample is in W_x."""
    rng = np.random.default_rng(seed + 4)
    per_point = 4
    jobs = []
    for x, n in zip(S, N):
        for _ in range(per_point):
            v = rng.standard_normal(body.dimension)
            v = v / np.linalg.norm(v)
            if v @ n < 0:
                v = -v
            jobs.append((x, v, float(v @ n), float(rng.uniform(0.05, 1.0))))

    def inside(job):
        x, v, slope, fraction = job
        rho = fraction * _w_radius(body, slope, m_w)
        p = x - rho * v
        return 1.0 - body.eval_F(p), p

    results = parallel_map(inside, jobs, threads)
    margins = [m for m, _ in results]
    points = [p for _, p in results]

    # Other boundary samples must violate the W_x inequality
    phi = body.modulus.phi
    dist = np.linalg.norm(S[:, np.newaxis, :] - S[np.newaxis, :, :], axis=-1)
    lhs = np.einsum("ik,ijk->ij", N, S[:, np.newaxis, :] - S[np.newaxis, :, :])
    outside = m_w * np.asarray(phi(2.0 * dist)) - lhs
    separated = dist > MIN_SEPARATION
    if np.any(separated):
        margins.extend(outside[separated].tolist())
        points.extend(S[np.nonzero(separated)[1]].tolist())
    worst, witnesses = _witness_margin(np.asarray(margins), points, tolerances.exact)
    return PropertyRecord("w_inclusion", "W_x lies in V and meets S only at x", len(margins), worst,
                          tolerances.exact, measured=m_w, witnesses=witnesses)


def _omega_inequality(body: BodyC1Omega, S: np.ndarray, N: np.ndarray, m_w: float) -> PropertyRecord:
    """<N(y), y - x> >= ||dN||/2 * omega^-1(||dN|| / (4M)) on sampled pairs."""
    own = np.einsum("ij,ij->i", N, S)
    lhs = own[np.newaxis, :] - S @ N.T
    dn = np.linalg.norm(N[:, np.newaxis, :] - N[np.newaxis, :, :], axis=-1)
    rhs = 0.5 * dn * np.asarray(body.modulus.omega_inverse(dn / (4.0 * m_w)))
    dist = np.linalg.norm(S[:, np.newaxis, :] - S[np.newaxis, :, :], axis=-1)
    margins = (lhs - rhs) / (1.0 + dist)
    np.fill_diagonal(margins, math.inf)
    i, j = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst = float(margins[i, j]) if len(S) > 1 else math.inf
    return PropertyRecord("normal_inequality", "<N(y), y - x> >= (|dN|/2) omega^-1(|dN| / 4M), M fitted",
                          len(S) * (len(S) - 1), worst, NORMAL_TOL, measured=m_w,
                          witnesses=[_point(S[i]), _point(S[j])] if worst < -NORMAL_TOL else [])


def _pinching(body: BodyC1Omega, S: np.ndarray, G: np.ndarray, tolerances: Tolerances) -> PropertyRecord:
    """M^-1 <= ||DF||_* <= M on the level set; the lower bound is the explicit one."""
    norms = np.asarray(body.space.dual().norm(G))
    lower = body.gradient_lower_bound()
    margins = (norms - lower) / max(lower, 1e-300)
    worst, witnesses = _witness_margin(margins, list(S), tolerances.exact)
    fitted = max(float(norms.max()), 1.0 / float(norms.min())) if norms.size else math.nan
    return PropertyRecord("gradient_pinching", "||DF|| >= (1 - inf F) / reach on the level set", len(S), worst,
                          tolerances.exact, measured=fitted, bound=lower, witnesses=witnesses)


def check_coercivity(body: BodyC1Omega, rays: int, seed: int, threads: int = 1) -> PropertyRecord:
    """F exceeds 1 along random rays before they leave the validated box."""
    origin = body.interior_point()
    directions = list(unit_directions(rays, body.dimension, np.random.default_rng(seed + 5)))

    def margin(u):
        t = box_exit(origin, u, body.box)
        return body.eval_F(origin + t * u) - 1.0

    margins = np.asarray(parallel_map(margin, directions, threads))
    worst, witnesses = _witness_margin(margins, [origin + u for u in directions], 0.0)
    return PropertyRecord("coercivity", "F > 1 where rays leave the validated box", rays, worst, 0.0,
                          witnesses=witnesses)



def _differential_pairs(space: NormSpace, S: np.ndarray, D: np.ndarray):
    """lhs[i, j] = D_j(s_j - s_i), dual-norm gaps of D and norm gaps of S."""
    own = np.einsum("ij,ij->i", D, S)
    lhs = own[np.newaxis, :] - S @ D.T
    dn = np.asarray(space.dual().norm(D[:, np.newaxis, :] - D[np.newaxis, :, :]))
    dist = np.asarray(space.norm(S[:, np.newaxis, :] - S[np.newaxis, :, :]))
    return lhs, dn, dist


def check_gauss_map_modulus(space: NormSpace, omega: ModulusCalculus, S: np.ndarray, D: np.ndarray,
                            tolerances: Tolerances = Tolerances()) -> PropertyRecord:
    """
    ||D(s) - D(t)||_* <= 4M omega(||s - t||), where M is the smallest constant
    with D(y)(y - x) >= ||dD||/2 omega^-1(||dD|| / 4M) on every sampled pair.

    Adding that inequality in both orders gives the bound, so a sampled Gauss
    map ratio above 4M refutes the pair terms. A pair with D(y)(y - x) <= 0
    and distinct differentials admits no M at all.
    """
    name = "gauss_map_modulus"
    statement = "||dD|| <= 4M omega(||ds||) with M fitted to the sampled normal inequality"
    lhs, dn, dist = _differential_pairs(space, S, D)
    keep = (dn > DIFFERENTIAL_FLOOR) & (dist > MIN_SEPARATION)
    np.fill_diagonal(keep, False)
    if not np.any(keep):
        return PropertyRecord(name, statement, len(S), math.inf, tolerances.lipschitz, measured=0.0,
                              skipped="no sample pairs with distinct differentials")
    ii, jj = np.nonzero(keep)
    ratio = dn[ii, jj] / np.asarray(omega.omega(dist[ii, jj]))
    measured = float(ratio.max())
    if np.any(lhs[ii, jj] <= 0.0):
        k = int(np.argmin(lhs[ii, jj]))
        return PropertyRecord(name, statement, len(ii), -math.inf, tolerances.lipschitz, measured=measured,
                              bound=math.inf, witnesses=[_point(S[ii[k]]), _point(S[jj[k]])])
    required = dn[ii, jj] / (4.0 * np.asarray(omega.omega(2.0 * lhs[ii, jj] / dn[ii, jj])))
    bound = 4.0 * float(required.max())
    worst = 1.0 - measured / bound
    k = int(np.argmax(ratio))
    witnesses = [_point(S[ii[k]]), _point(S[jj[k]])] if worst < -tolerances.lipschitz else []
    return PropertyRecord(name, statement, len(ii), worst, tolerances.lipschitz, measured=measured,
                          bound=bound, witnesses=witnesses)


def check_sampled_feasibility(space: NormSpace, S: np.ndarray, D: np.ndarray,
                              modulus: Optional[ModulusCalculus] = None,
                              alpha: Optional[float] = None) -> PropertyRecord:
    """
    Boundary samples with their normalized differentials are feasible data.

    The largest constant delta is fitted over pairs whose differentials are
    separated by more than the noise floor; it must be positive, and the pair
    inequality is then checked at that delta on every one of those pairs.
    Pairs below the floor only need D(y)(y - x) >= 0.
    """
    name = "sampled_feasibility"
    if alpha is not None:
        statement = "D(y)(y - x) >= delta ||dD||^(1 + 1/alpha) with delta > 0 fitted"
        power = 1.0 + 1.0 / alpha

        def extremal(lhs, dn):
            return lhs / dn ** power

        def rhs(delta, dn):
            return delta * dn ** power
    elif modulus is not None:
        statement = "<N(y), y - x> >= ||dN|| omega^-1(delta ||dN||) with delta > 0 fitted"

        def extremal(lhs, dn):
            return np.asarray(modulus.omega(np.maximum(lhs, 0.0) / dn)) / dn

        def rhs(delta, dn):
            return dn * np.asarray(modulus.omega_inverse(delta * dn))
    else:
        raise InputError("sampled feasibility needs a modulus or alpha")

    lhs, dn, dist = _differential_pairs(space, S, D)
    offdiag = ~np.eye(len(S), dtype=bool)
    keep = offdiag & (dn > DIFFERENTIAL_FLOOR)
    near = offdiag & ~keep
    margins = np.full(lhs.shape, math.inf)
    margins[near] = lhs[near] / (1.0 + dist[near])
    fitted = math.inf
    if np.any(keep):
        ratios = extremal(lhs[keep], dn[keep])
        fitted = float(ratios.min())
        if fitted > 0.0:
            margins[keep] = (lhs[keep] - rhs(fitted, dn[keep])) / (1.0 + dist[keep])
        else:
            margins[keep] = np.where(ratios > 0.0, math.inf, -math.inf)
    ii, jj = np.nonzero(offdiag)
    flat = margins[ii, jj]
    worst = float(flat.min()) if flat.size else math.inf
    order = np.argsort(flat)[:MAX_WITNESSES]
    witnesses = [_point(np.concatenate((S[ii[k]], S[jj[k]]))) for k in order if flat[k] < -NORMAL_TOL]
    return PropertyRecord(name, statement, len(ii), worst, NORMAL_TOL, measured=fitted, witnesses=witnesses)


def check_distance_term(body: BodyC1Omega, samples: int, seed: int, threads: int = 1) -> PropertyRecord:
    """phi(d_A(x+h)) + phi(d_A(x-h)) - 2 phi(d_A(x)) <= phi(2||h||) at random x in the box."""
    rng = np.random.default_rng(seed + 6)
    low, high = body.box
    X = rng.uniform(low, high, (samples, body.dimension))
    H = unit_directions(samples, body.dimension, rng) * rng.uniform(0.0, body.reach, samples)[:, np.newaxis]
    phi = body.modulus.phi

    def margin(job):
        x, h = job
        d_plus, d_minus, d_mid = (body.distance_to_A(p)[1] for p in (x + h, x - h, x))
        second = float(phi(d_plus)) + float(phi(d_minus)) - 2.0 * float(phi(d_mid))
        bound = float(phi(2.0 * float(np.linalg.norm(h))))
        return (bound - second) / (1.0 + bound)

    margins = np.asarray(parallel_map(margin, list(zip(X, H)), threads))
    worst, witnesses = _witness_margin(margins, list(X), NORMAL_TOL)
    return PropertyRecord(DISTANCE_TERM, DISTANCE_TERM_STATEMENT, samples, worst, NORMAL_TOL,
                          witnesses=witnesses)


def check_norm_smoothness(space: NormSpace, alpha: float, samples: int = 16, seed: int = 0,
                          tolerances: Tolerances = Tolerances()) -> PropertyRecord:
    """
    ||x+h||^(1+a) + ||x-h||^(1+a) - 2||x||^(1+a) <= L ||h||^(1+a), L fitted.

    The ratio is taken at shrinking ||h||. For an admissible norm it stays
    bounded, so the finest scale may not exceed the coarser ones by more than
    SMOOTHNESS_GROWTH. Coordinate axes are always sampled, since l_p norms with
    p < 2 are least smooth there. The Euclidean square has L = 2 exactly.
    """
    n = space.dimension
    rng = np.random.default_rng(seed + 7)
    X = np.vstack((np.eye(n), -np.eye(n), unit_directions(samples, n, rng)))
    U = np.vstack((np.eye(n), unit_directions(samples, n, rng)))
    power = 1.0 + alpha

    def f(v):
        return np.asarray(space.norm(v)) ** power

    fx = f(X)[:, np.newaxis]
    per_scale = []
    for t in SMOOTHNESS_SCALES:
        H = t * U
        second = f(X[:, np.newaxis, :] + H) + f(X[:, np.newaxis, :] - H) - 2.0 * fx
        per_scale.append(float(np.max(second / f(H)[np.newaxis, :])))
    fitted = max(per_scale)
    if space.is_euclidean and alpha == 1.0:
        bound = 2.0
        worst = (bound - fitted) / bound
    else:
        bound = SMOOTHNESS_GROWTH * max(per_scale[:-1])
        worst = (bound - per_scale[-1]) / bound
    return PropertyRecord(NORM_SMOOTHNESS, NORM_SMOOTHNESS_STATEMENT, len(X) * len(U) * len(SMOOTHNESS_SCALES),
                          worst, tolerances.lipschitz, measured=fitted, bound=bound)
