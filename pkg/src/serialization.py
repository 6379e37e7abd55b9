"""Problem, body and report files (JSON)."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .body_c11 import BodyC11
from .body_c1omega import BodyC1Omega, DualAlpha, HilbertOmega
from .envelope import backend_from_dict
from .errors import InputError
from .feasibility import TangencyProblem
from .geometry import NormSpace, Polytope, as_vector
from .modulus import ModulusCalculus, modulus_from_dict

logger = logging.getLogger(__name__)

Body = Union[BodyC11, BodyC1Omega]


@dataclass
class ProblemFile:
    """Parsed problem file: the data plus optional modulus and construction parameters."""

    problem: TangencyProblem
    modulus: Optional[ModulusCalculus] = None
    construction: dict = field(default_factory=dict)


def read_json(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read file: {e}", str(path))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"line {e.lineno}, column {e.colno}: {e.msg}", str(path))
    if not isinstance(data, dict):
        raise InputError("top level must be an object", str(path))
    return data


def dumps(data: dict) -> str:
    """Canonical text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, data: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data))


def space_from_dict(spec: Optional[dict], dimension: int) -> NormSpace:
    spec = spec or {"kind": "euclidean"}
    kind = spec.get("kind", "euclidean")
    if kind == "euclidean":
        return NormSpace.euclidean(dimension)
    if kind == "lp":
        if "p" not in spec:
            raise InputError("lp norm needs an exponent p", "norm")
        return NormSpace.lp(dimension, float(spec["p"]))
    raise InputError(f"unknown norm kind {kind!r}", "norm")


def problem_from_dict(data: dict, normalize: Optional[bool] = None) -> TangencyProblem:
    """
    Build a TangencyProblem; every validation error names its record.

    Records carry "normal" (unit outer normal, Euclidean only) or "dual" (unit
    functional). With normalize set, the vectors are rescaled to unit length.
    """
    if "dimension" not in data:
        raise InputError("missing field", "dimension")
    dimension = data["dimension"]
    if not isinstance(dimension, int) or dimension < 1:
        raise InputError("must be a positive integer", "dimension")
    space = space_from_dict(data.get("norm"), dimension)
    records = data.get("data")
    if not isinstance(records, list) or not records:
        raise InputError("must be a non-empty list", "data")
    if normalize is None:
        normalize = bool(data.get("normalize", False))

    points, normals = [], []
    kinds = set()
    for i, record in enumerate(records):
        where = f"data[{i}]"
        if not isinstance(record, dict) or "point" not in record:
            raise InputError("record needs a point", where)
        points.append(as_vector(record["point"], dimension, f"{where}.point"))
        if "normal" in record:
            kinds.add("normal")
            vector = as_vector(record["normal"], dimension, f"{where}.normal")
        elif "dual" in record:
            kinds.add("dual")
            vector = as_vector(record["dual"], dimension, f"{where}.dual")
        else:
            raise InputError("record needs a normal or a dual functional", where)
        if normalize:
            length = float(space.dual().norm(vector) if "dual" in record else space.norm(vector))
            if length == 0.0:
                raise InputError("cannot normalize a zero vector", where)
            vector = vector / length
        normals.append(vector)
    if len(kinds) > 1:
        raise InputError("records mix normals and dual functionals", "data")

    # Validation messages already name the offending data[i]
    return TangencyProblem(space, np.vstack(points), np.vstack(normals), dual="dual" in kinds)


def problem_to_dict(problem: TangencyProblem, modulus: Optional[ModulusCalculus] = None,
                    construction: Optional[dict] = None) -> dict:
    key = "dual" if problem.dual else "normal"
    data = {
        "dimension": problem.dimension,
        "norm": problem.space.to_dict(),
        "data": [
            {"point": [float(v) for v in p], key: [float(v) for v in n]}
            for p, n in zip(problem.points, problem.normals)
        ],
    }
    if modulus is not None:
        data["modulus"] = modulus.to_dict()
    if construction:
        data["construction"] = construction
    return data


def load_problem(path: Path, normalize: Optional[bool] = None) -> ProblemFile:
    data = read_json(path)
    problem = problem_from_dict(data, normalize)
    modulus = ModulusCalculus(modulus_from_dict(data["modulus"])) if "modulus" in data else None
    construction = data.get("construction") or {}
    if not isinstance(construction, dict):
        raise InputError("must be an object", "construction")
    logger.debug("loaded %d data from %s", len(problem), path)
    return ProblemFile(problem=problem, modulus=modulus, construction=construction)


def save_problem(path: Path, problem: TangencyProblem, modulus: Optional[ModulusCalculus] = None,
                 construction: Optional[dict] = None):
    write_json(path, problem_to_dict(problem, modulus, construction))


def body_to_dict(body: Body) -> dict:
    """Data, modulus, constants and backend spec; envelope grids are regenerated on load."""
    if isinstance(body, BodyC11):
        data = {
            "kind": "c11",
            "dimension": body.dimension,
            "radius": body.radius,
            "centers": [[float(v) for v in c] for c in body.centers.vertices],
        }
        if body.source is not None:
            data["problem"] = problem_to_dict(body.source)
        return data
    data = {
        "kind": body.variant.kind,
        "delta": body.delta,
        "backend": body.envelope.to_dict(),
        "problem": problem_to_dict(body.source),
    }
    if isinstance(body.variant, DualAlpha):
        data["alpha"] = body.variant.alpha
    else:
        data["modulus"] = body.modulus.to_dict()
    return data


def _c11_from_dict(data: dict) -> BodyC11:
    """Stored centers win; without them the centers are y - r N(y) of the stored data."""
    if "radius" not in data:
        raise InputError("missing field", "radius")
    radius = float(data["radius"])
    problem = problem_from_dict(data["problem"]) if "problem" in data else None
    if problem is not None and problem.dual and not problem.space.is_euclidean:
        raise InputError("c11 bodies need Euclidean normals", "problem")
    if "centers" in data:
        dimension = data.get("dimension", problem.dimension if problem is not None else None)
        centers = data["centers"]
        if not isinstance(centers, list) or not centers:
            raise InputError("must be a non-empty list of points", "centers")
        vertices = np.vstack([as_vector(c, dimension, f"centers[{i}]") for i, c in enumerate(centers)])
    elif problem is not None:
        vertices = problem.points - radius * problem.unit_normals
    else:
        raise InputError("missing field", "centers")
    return BodyC11(Polytope(vertices), radius, problem)


def body_from_dict(data: dict) -> Body:
    """
    Rebuild a body as stored, without re-running feasibility.

    A body file with edited constants therefore loads; verification is what
    catches it.
    """
    kind = data.get("kind")
    if kind == "c11":
        return _c11_from_dict(data)
    if kind not in ("c1omega", "c1alpha"):
        raise InputError(f"unknown body kind {kind!r}", "kind")
    if "problem" not in data:
        raise InputError("missing field", "problem")
    problem = problem_from_dict(data["problem"])
    if "delta" not in data:
        raise InputError("missing field", "delta")
    delta = float(data["delta"])
    backend = backend_from_dict(data.get("backend") or {"kind": "direct"})
    if kind == "c1alpha":
        alpha = float(data["alpha"])
        modulus = ModulusCalculus(modulus_from_dict({"kind": "power", "K": 1.0, "alpha": alpha}))
        return BodyC1Omega(problem, modulus, delta, DualAlpha.from_delta(alpha, delta), backend)
    if "modulus" not in data:
        raise InputError("missing field", "modulus")
    modulus = ModulusCalculus(modulus_from_dict(data["modulus"]))
    return BodyC1Omega(problem, modulus, delta, HilbertOmega(), backend)


def save_body(path: Path, body: Body):
    write_json(path, body_to_dict(body))


def load_body(path: Path) -> Body:
    return body_from_dict(read_json(path))
