"""
Command-line entry point.

    python3 -m src.cli feasibility problem.json --class c11
    python3 -m src.cli build problem.json --class c1omega --alpha 0.5 --auto --out body.json
    python3 -m src.cli verify body.json --seed 7 --samples 200
    python3 -m src.cli export body.json --format obj --count 400 --seed 7 --out body.obj
    python3 -m src.cli sample body.json --count 100 --seed 7 --out samples.json
    python3 -m src.cli fixture cusp --param h_min=1e-3 --param h_max=2 --param count=20 --out cusp.json

Exit codes: 0 pass, 1 input error, 2 mathematical failure (infeasible data,
failed verification), 3 numerical backend failure.
"""

import argparse
import csv
import io
import logging
import math
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.spatial import ConvexHull

from .body_c11 import BodyC11, build_c11
from .body_c1omega import BodyC1Omega, build_c1alpha, build_c1omega
from .config import Config
from .envelope import DirectConcaveMax, default_grid_resolution
from .errors import ConvexJetsError, InputError
from .feasibility import TangencyProblem, scan
from .fixtures import FixtureSpec
from .geometry import NormSpace
from .modulus import ModulusCalculus, PowerModulus
from .serialization import (
    ProblemFile,
    dumps,
    load_body,
    load_problem,
    problem_to_dict,
    save_body,
    write_json,
)
from .verifier import Tolerances, verify_c11, verify_c1omega, verify_signed_distance

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MATH = 2
EXIT_BACKEND = 3


class Console:
    """Status lines on stdout, mirrored to the run log when one is configured."""

    def __init__(self, run_log: Optional[Path] = None):
        self.run_log = run_log

    def _log(self, message: str):
        if self.run_log is not None:
            timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
            try:
                self.run_log.parent.mkdir(parents=True, exist_ok=True)
                with open(self.run_log, "a") as f:
                    f.write(f"[{timestamp}] {message}\n")
            except OSError as e:
                print(f"Warning: Could not write to log: {e}")
        print(message)

    def ok(self, message: str):
        self._log(f"[OK] {message}")

    def fail(self, message: str):
        self._log(f"[FAIL] {message}")

    def skip(self, message: str):
        self._log(f"[SKIP] {message}")

    def info(self, message: str):
        self._log(message)


def _modulus(args, problem_file: ProblemFile) -> ModulusCalculus:
    if args.alpha is not None or args.K is not None:
        return ModulusCalculus(PowerModulus(K=args.K if args.K is not None else 1.0,
                                            alpha=args.alpha if args.alpha is not None else 1.0))
    if problem_file.modulus is not None:
        return problem_file.modulus
    raise InputError("this class needs a modulus: pass --alpha/--K or add one to the problem file", "modulus")


def _alpha(args, problem_file: ProblemFile) -> float:
    if args.alpha is not None:
        return args.alpha
    modulus = problem_file.modulus
    if modulus is not None and modulus.is_power:
        return modulus.modulus.alpha
    raise InputError("c1alpha needs --alpha or a power modulus in the problem file", "alpha")


def _scan(args, problem_file: ProblemFile, constant: Optional[float], tol: float):
    problem = problem_file.problem
    if args.cls == "c11":
        return scan(problem, "c11", constant=constant, tol=tol)
    if args.cls == "c1omega":
        return scan(problem, "c1omega", modulus=_modulus(args, problem_file), constant=constant, tol=tol)
    return scan(problem, "c1alpha", alpha=_alpha(args, problem_file), constant=constant, tol=tol)


def _default_class(problem: TangencyProblem) -> str:
    return "c11" if problem.space.is_euclidean and not problem.dual else "c1alpha"


def cmd_feasibility(args, config: Config, console: Console) -> int:
    problem_file = load_problem(args.problem, args.normalize)
    args.cls = args.cls or _default_class(problem_file.problem)
    constant = args.radius if args.cls == "c11" else args.delta
    tol = args.tol if args.tol is not None else config.feasibility_tol
    report = _scan(args, problem_file, constant, tol)
    data = report.to_dict()
    key = "r_max" if args.cls == "c11" else "delta_max"
    data[key] = data["extremal_constant"]
    if args.out:
        write_json(args.out, data)
    label = f"{key} = {report.extremal_constant:.15g}"
    if report.feasible:
        console.ok(f"{args.cls} feasible ({len(problem_file.problem)} data, {label})")
        return EXIT_OK
    pair = report.violating_pair
    console.fail(f"{args.cls} infeasible: violating pair {pair[0]}, {pair[1]}" if pair else f"{args.cls} infeasible")
    if report.diagnostic:
        console.info(f"  {report.diagnostic}")
    return EXIT_MATH


def _constant(args, problem_file: ProblemFile, config: Config, console: Console) -> Optional[float]:
    name = "radius" if args.cls == "c11" else "delta"
    given = getattr(args, name)
    if given is None:
        stored = problem_file.construction.get("r" if args.cls == "c11" else "delta")
        given = float(stored) if stored is not None else None
    if given is not None and not args.auto:
        return float(given)
    if not args.auto:
        raise InputError(f"pass --{name} or --auto", name)
    report = _scan(args, problem_file, None, config.feasibility_tol)
    extremal = report.extremal_constant
    if not report.feasible:
        return None
    if not math.isfinite(extremal):
        raise InputError(f"the sharp {name} is unbounded for this data; pass --{name}", name)
    value = config.auto_margin * extremal
    console.info(f"--auto: {name} = {config.auto_margin:g} x {extremal:.12g} = {value:.12g}")
    return value


def _smoke_check(body, console: Console) -> bool:
    """Interpolation identities on the data, run after every build."""
    problem = body.source
    worst = 0.0
    for y in problem.points:
        if isinstance(body, BodyC11):
            worst = max(worst, abs(body.signed_distance(y)))
        else:
            worst = max(worst, abs(body.eval_F(y) - 1.0))
    limit = 1e-9 if isinstance(body, BodyC11) else 1e-5
    if worst <= limit:
        console.ok(f"interpolation identities hold (worst residual {worst:.3e})")
        return True
    console.fail(f"interpolation residual {worst:.3e} exceeds {limit:g}")
    return False


def cmd_build(args, config: Config, console: Console) -> int:
    problem_file = load_problem(args.problem, args.normalize)
    problem = problem_file.problem
    args.cls = args.cls or _default_class(problem)
    constant = _constant(args, problem_file, config, console)
    if constant is None:
        report = _scan(args, problem_file, None, config.feasibility_tol)
        pair = report.violating_pair
        console.fail(f"{args.cls} infeasible: violating pair {pair[0]}, {pair[1]}" if pair else "infeasible data")
        return EXIT_MATH

    if args.cls == "c11":
        body = build_c11(problem, constant, config.feasibility_tol)
        console.ok(f"built c11 body, r = {constant:.12g}, {len(body.centers)} centers")
    else:
        direct = DirectConcaveMax(tol=config.inner_tol, max_iter=config.max_iter)
        if args.cls == "c1omega":
            body = build_c1omega(problem, _modulus(args, problem_file), constant, direct, config.feasibility_tol)
        else:
            body = build_c1alpha(problem, _alpha(args, problem_file), constant, direct, config.feasibility_tol)
        resolution = default_grid_resolution(body.dimension, config.grid_resolution, config.grid_resolution_3d)
        # The grid needs the validated box, which only exists once the body does
        if (args.backend or config.envelope_backend) == "grid":
            body.envelope = body.grid_backend(resolution)
        console.ok(f"built {args.cls} body, delta = {constant:.12g}, inf F = {body.inf_value:.12g}")
        if config.cross_check and not args.no_cross_check and body.dimension <= 3:
            worst = body.envelope_agreement(config.cross_check_points, args.seed, resolution)
            console.ok(f"envelope backends agree (worst difference {worst:.3e})")
        else:
            console.skip("envelope cross-check")

    smoke = _smoke_check(body, console)
    if args.out:
        save_body(args.out, body)
        console.info(f"body written to {args.out}")
    return EXIT_OK if smoke else EXIT_MATH


def cmd_verify(args, config: Config, console: Console) -> int:
    body = load_body(args.body)
    samples = args.samples or config.samples
    tolerances = Tolerances.from_config(config)
    threads = args.threads or config.threads
    if isinstance(body, BodyC11):
        reports = [
            verify_c11(body, samples, args.seed, tolerances, args.rolling_radius, config.ball_samples,
                       threads, args.refine),
            verify_signed_distance(body, args.epsilon, samples, args.seed, tolerances, threads, args.refine),
        ]
    else:
        reports = [verify_c1omega(body, samples, args.seed, tolerances, threads, args.refine)]
    passed = all(r.passed for r in reports)
    data = {"passed": passed, "reports": [r.to_dict() for r in reports]}
    if args.out:
        write_json(args.out, data)
    for report in reports:
        for record in report.properties:
            measured = "" if record.measured is None else f" (measured {record.measured:.6g})"
            if record.skipped:
                console.skip(f"{report.body_kind}/{record.name}: {record.skipped}")
            elif record.passed:
                console.ok(f"{report.body_kind}/{record.name}{measured}")
            else:
                console.fail(f"{report.body_kind}/{record.name}: worst margin {record.worst_margin:.3e}{measured}")
                for w in record.witnesses:
                    console.info(f"  witness {w}")
    return EXIT_OK if passed else EXIT_MATH


def _clip_box(values: Optional[List[float]], dimension: int):
    if values is None:
        return None
    if len(values) != 2 * dimension:
        raise InputError(f"--clip-box needs {2 * dimension} numbers (low then high)", "clip-box")
    return np.asarray(values[:dimension]), np.asarray(values[dimension:])


def _boundary(body, count: int, seed: int, clip, threads: int) -> np.ndarray:
    if isinstance(body, BodyC11):
        return np.asarray(body.sample_boundary(count, seed, clip_box=clip))
    return np.asarray(body.boundary_sample(count, seed, clip_box=clip, threads=threads))


def _normals(body, points: np.ndarray) -> np.ndarray:
    if isinstance(body, BodyC11):
        return np.asarray([body.distance_gradient(p) for p in points])
    return np.asarray([body.boundary_normal(p) for p in points])


def _level(body, p) -> float:
    if isinstance(body, BodyC11):
        return body.signed_distance(p)
    return body.eval_F(p) - 1.0


def render_polyline(points: np.ndarray, centre: np.ndarray) -> str:
    """Closed 2D polyline ordered by angle about an interior point."""
    angles = np.arctan2(points[:, 1] - centre[1], points[:, 0] - centre[0])
    ordered = points[np.argsort(angles)]
    lines = [f"{p[0]!r} {p[1]!r}" for p in ordered.tolist()]
    lines.append(lines[0])
    return "\n".join(lines) + "\n"


def render_obj(points: np.ndarray, centre: np.ndarray) -> str:
    """Wavefront OBJ: one polygon in the plane z = 0 for 2D, an outward triangulated hull in 3D."""
    out = io.StringIO()
    out.write("# convex-jets boundary samples\n")
    if points.shape[1] == 2:
        angles = np.arctan2(points[:, 1] - centre[1], points[:, 0] - centre[0])
        order = np.argsort(angles)
        for p in points[order]:
            out.write(f"v {p[0]!r} {p[1]!r} 0.0\n")
        out.write("f " + " ".join(str(i + 1) for i in range(len(points))) + "\n")
        return out.getvalue()
    if points.shape[1] != 3:
        raise InputError("OBJ export supports dimension 2 or 3", "format")
    hull = ConvexHull(points)
    for p in points:
        out.write(f"v {p[0]!r} {p[1]!r} {p[2]!r}\n")
    for a, b, c in hull.simplices:
        normal = np.cross(points[b] - points[a], points[c] - points[a])
        if normal @ (points[a] - centre) < 0:
            b, c = c, b
        out.write(f"f {a + 1} {b + 1} {c + 1}\n")
    return out.getvalue()


def render_csv(points: np.ndarray, normals: np.ndarray, levels: List[float]) -> str:
    n = points.shape[1]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([f"x{i}" for i in range(n)] + [f"n{i}" for i in range(n)] + ["level"])
    for p, v, level in zip(points.tolist(), normals.tolist(), levels):
        writer.writerow([repr(x) for x in p] + [repr(x) for x in v] + [repr(float(level))])
    return out.getvalue()


def cmd_export(args, config: Config, console: Console) -> int:
    body = load_body(args.body)
    clip = _clip_box(args.clip_box, body.dimension)
    if not body.bounded and clip is None:
        raise InputError("unbounded body: pass --clip-box", "clip-box")
    threads = args.threads or config.threads
    points = _boundary(body, args.count, args.seed, clip, threads)
    if len(points) == 0:
        raise InputError("no boundary samples inside the clip box", "clip-box")
    centre = body.interior_point()
    if args.format == "polyline":
        if body.dimension != 2:
            raise InputError("polyline export needs dimension 2", "format")
        text = render_polyline(points, centre)
    elif args.format == "obj":
        text = render_obj(points, centre)
    else:
        text = render_csv(points, _normals(body, points), [_level(body, p) for p in points])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        console.ok(f"{len(points)} boundary points written to {args.out} ({args.format})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sample(args, config: Config, console: Console) -> int:
    """Boundary samples with their normals, written as a problem file."""
    body = load_body(args.body)
    clip = _clip_box(args.clip_box, body.dimension)
    threads = args.threads or config.threads
    points = _boundary(body, args.count, args.seed, clip, threads)
    if isinstance(body, BodyC1Omega) and not body.space.is_euclidean:
        duals = []
        for p in points:
            grad = body.grad_F(p)
            duals.append(grad / body.gradient_norm(grad))
        sampled = TangencyProblem(body.space, points, np.asarray(duals), dual=True)
    else:
        sampled = TangencyProblem(NormSpace.euclidean(body.dimension), points, _normals(body, points))
    data = problem_to_dict(sampled)
    if args.out:
        write_json(args.out, data)
        console.ok(f"{len(points)} boundary samples written to {args.out}")
    else:
        sys.stdout.write(dumps(data))
    return EXIT_OK


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return tuple(_parse_value(t) for t in text.split(","))
    return text


def cmd_fixture(args, config: Config, console: Console) -> int:
    params = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {item!r}", "param")
        params[key] = _parse_value(value)
    spec = FixtureSpec(args.name, params)
    if args.out:
        spec.write(args.out)
        console.ok(f"fixture {args.name} written to {args.out}")
    else:
        sys.stdout.write(dumps(problem_to_dict(spec.generate())))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convex-jets",
        description="Decide, construct and verify convex bodies interpolating tangency data.",
    )
    parser.add_argument("--config", type=Path, default=None, help="Config file (default ~/.convex_jets_config).")
    parser.add_argument("--verbose", action="store_true", help="Library log level DEBUG.")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"Threads for sample sweeps (default from config or ${Config.THREADS_ENV}).")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_class_flags(p):
        p.add_argument("--class", dest="cls", choices=["c11", "c1omega", "c1alpha"], default=None,
                       help="Regularity class (default c11 for Euclidean normals, c1alpha for dual data).")
        p.add_argument("--radius", type=float, default=None, help="C^{1,1} radius r.")
        p.add_argument("--delta", type=float, default=None, help="C^{1,omega} / C^{1,alpha} constant delta.")
        p.add_argument("--alpha", type=float, default=None, help="Exponent of omega(t) = K t^alpha.")
        p.add_argument("--K", type=float, default=None, help="Coefficient of omega(t) = K t^alpha.")
        p.add_argument("--normalize", action="store_true", help="Rescale normals to unit length.")

    p = sub.add_parser("feasibility", help="Pairwise feasibility scan; reports r_max or delta_max.")
    p.add_argument("problem", type=Path)
    add_class_flags(p)
    p.add_argument("--tol", type=float, default=None, help="Feasibility tolerance (default 1e-12).")
    p.add_argument("--out", type=Path, default=None, help="Report file.")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("build", help="Construct a body and run the post-build smoke check.")
    p.add_argument("problem", type=Path)
    add_class_flags(p)
    p.add_argument("--auto", action="store_true",
                   help="Use r = margin * r_max or delta = margin * delta_max (margin [build] auto_margin, default 1/2).")
    p.add_argument("--backend", choices=["direct", "grid"], default=None, help="Envelope backend.")
    p.add_argument("--no-cross-check", action="store_true", help="Skip the envelope backend cross-check.")
    p.add_argument("--seed", type=int, default=0, help="Seed of the cross-check points.")
    p.add_argument("--out", type=Path, default=None, help="Body file.")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="Run the sampled regularity characterizations.")
    p.add_argument("body", type=Path)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=None, help="Boundary samples (default from config).")
    p.add_argument("--epsilon", type=float, default=0.5, help="U_eps parameter of the signed-distance suite.")
    p.add_argument("--rolling-radius", type=float, default=None, help="Rolling-ball radius (default 0.99 r).")
    p.add_argument("--refine", action="store_true", help="Rerun at doubled samples and report both constants.")
    p.add_argument("--out", type=Path, default=None, help="Report file.")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="Boundary geometry as polyline, OBJ or CSV.")
    p.add_argument("body", type=Path)
    p.add_argument("--format", choices=["polyline", "obj", "csv"], default="csv")
    p.add_argument("--count", type=int, default=360)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-box", type=float, nargs="+", default=None, help="low_1 .. low_n high_1 .. high_n")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("sample", help="Boundary samples with normals, as a problem file.")
    p.add_argument("body", type=Path)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--clip-box", type=float, nargs="+", default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fixture", help="Write a generated data set as a problem file.")
    p.add_argument("name")
    p.add_argument("--param", action="append", help="Generator parameter key=value (repeatable).")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    config = Config(args.config)
    config.load()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, config.log_level),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    console = Console(config.run_log)
    try:
        return args.func(args, config, console)
    except ConvexJetsError as e:
        console.fail(str(e))
        return e.exit_code
    except ValueError as e:
        console.fail(str(e))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
