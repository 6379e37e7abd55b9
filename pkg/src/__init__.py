"""Convex Jets - Source modules."""

from .config import Config
from .errors import (
    BackendDisagreementError,
    ConvexJetsError,
    DomainError,
    InfeasibleError,
    InputError,
    NumericalError,
    RegionError,
)
from .geometry import NormSpace, Polytope, project_polytope, polytope_distance
from .modulus import ModulusCalculus, PowerModulus, TabulatedModulus
from .feasibility import (
    TangencyProblem,
    FeasibilityReport,
    check_c11,
    check_c1omega,
    check_c1alpha_dual,
    max_c11_radius,
    max_c1omega_delta,
    max_c1alpha_delta,
)
from .body_c11 import BodyC11, build_c11
from .envelope import DirectConcaveMax, GridBiconjugate, convex_envelope_eval
from .body_c1omega import BodyC1Omega, build_c1omega, build_c1alpha
from .verifier import VerificationReport, verify_c11, verify_signed_distance, verify_c1omega

__all__ = [
    "Config",
    "ConvexJetsError",
    "InputError",
    "DomainError",
    "RegionError",
    "NumericalError",
    "InfeasibleError",
    "BackendDisagreementError",
    "NormSpace",
    "Polytope",
    "project_polytope",
    "polytope_distance",
    "PowerModulus",
    "TabulatedModulus",
    "ModulusCalculus",
    "TangencyProblem",
    "FeasibilityReport",
    "check_c11",
    "check_c1omega",
    "check_c1alpha_dual",
    "max_c11_radius",
    "max_c1omega_delta",
    "max_c1alpha_delta",
    "BodyC11",
    "build_c11",
    "DirectConcaveMax",
    "GridBiconjugate",
    "convex_envelope_eval",
    "BodyC1Omega",
    "build_c1omega",
    "build_c1alpha",
    "VerificationReport",
    "verify_c11",
    "verify_signed_distance",
    "verify_c1omega",
]
