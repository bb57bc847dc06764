"""Explicit Hamiltonian and reversible systems with families of Kronecker
tori, and exact or sampled checks of their properties."""

from .dynamics import (
    BlowUp,
    IntegratorConfig,
    State,
    Trajectory,
    estimate_frequencies,
    find_recurrence_time,
    integrate,
    measure_exceptional_period,
    monotone_escape_detector,
)
from .exact_poly import PolyExpr, VarKind, poisson_bracket, weighted_sos_form
from .grammar import format_expr, parse_expr, parse_program
from .poisson_core import (
    Dims,
    StructureMatrix,
    StructureSpec,
    TorusKind,
    assemble_structure,
    classify_torus,
    default_structure,
    torus_tangent_complement,
)
from .systems import (
    HamParams,
    Kind,
    RevParams,
    SystemModel,
    first_integrals,
    make_system,
    make_torus,
    plan_parameters,
    plan_reversible,
    reversibility_check,
    torus_frequency,
)
from .verify import ClaimReport, DomainSpec, diophantine_scan, uniqueness_scan, verify_theorem_suite

__all__ = [name for name in dir() if not name.startswith("_")]
