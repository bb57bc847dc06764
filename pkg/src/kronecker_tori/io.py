"""System documents: the JSON unit of exchange between CLI subcommands.

Hamiltonian kinds::

    {"kind": "ham-noncompact", "dims": {"s": 1, "k": 1, "l": 1},
     "Z": [["0"], ["0"], ["1"]], "L": [...],
     "zeta": ["1"], "xi": ["1"], "eta": ["1"], "h": "u1"}

Reversible kinds::

    {"kind": "rev-compact", "n": 2, "m": 1, "l": 1,
     "zeta": ["1"], "xi": ["1"], "h": ["1", "3/2"]}

Numbers are exact rational strings; floats are rejected.  ``h`` is
grammar text.  An optional ``plan`` block records the request a planner
document was generated from and is carried through unchanged.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import linalg as la
from .exact_poly import VarKind
from .grammar import format_expr, parse_expr
from .poisson_core import Dims, matrix_to_json, spec_from_dict
from .systems import HamParams, Kind, RevParams, SystemModel, make_system


class DocumentError(ValueError):
    pass


def _exact_list(values, name: str) -> tuple[Fraction, ...]:
    if not isinstance(values, list):
        raise DocumentError(f"{name} must be a list of rational strings")
    for v in values:
        if isinstance(v, float) or isinstance(v, bool):
            raise DocumentError(f"{name}: floats are not accepted, use \"p/q\" strings")
    try:
        return tuple(la.to_fraction(v) for v in values)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise DocumentError(f"{name}: {exc}") from exc


def _u_context(count: int, compact: bool) -> dict[str, VarKind]:
    kind = VarKind.ANGLE if compact else VarKind.LINE
    return {f"u{i + 1}": kind for i in range(count)}


def params_to_document(params: HamParams | RevParams, plan: dict | None = None) -> dict:
    strs = lambda xs: [la.fraction_str(x) for x in xs]  # noqa: E731
    if isinstance(params, HamParams):
        d = params.dims
        doc = {
            "kind": params.kind.value,
            "dims": {"s": d.s, "k": d.k, "l": d.l},
            "Z": matrix_to_json(params.spec.Z),
            "L": matrix_to_json(params.spec.L),
            "zeta": strs(params.zeta),
            "xi": strs(params.xi),
            "eta": strs(params.eta),
            "h": format_expr(params.h),
        }
    else:
        doc = {
            "kind": params.kind.value,
            "n": params.n,
            "m": params.m,
            "l": params.l,
            "zeta": strs(params.zeta),
            "xi": strs(params.xi),
            "h": [format_expr(h) for h in params.h],
        }
    if plan is not None:
        doc["plan"] = plan
    return doc


def params_from_document(doc: dict) -> HamParams | RevParams:
    if not isinstance(doc, dict):
        raise DocumentError("a system document is a JSON object")
    try:
        kind = Kind(doc["kind"])
    except (KeyError, ValueError) as exc:
        raise DocumentError(f"kind must be one of {[k.value for k in Kind]}") from exc
    try:
        if kind.hamiltonian:
            spec = spec_from_dict(doc)
            d = spec.dims
            h = parse_expr(str(doc.get("h", "0")), _u_context(d.s, kind.compact))
            return HamParams(
                spec,
                _exact_list(doc.get("zeta", []), "zeta"),
                _exact_list(doc.get("xi", []), "xi"),
                _exact_list(doc.get("eta", []), "eta"),
                h,
                kind,
            )
        n, m, l = (int(doc[k]) for k in ("n", "m", "l"))
        Dims(m, 0, l)  # non-negativity
        if n < 0:
            raise DocumentError("n must be non-negative")
        texts = doc.get("h", [])
        if not isinstance(texts, list):
            raise DocumentError("h must be a list of n expressions for reversible kinds")
        ctx = _u_context(m, kind.compact)
        hs = tuple(parse_expr(str(t), ctx) for t in texts)
        return RevParams(n, m, l, _exact_list(doc.get("zeta", []), "zeta"), _exact_list(doc.get("xi", []), "xi"), hs, kind)
    except KeyError as exc:
        raise DocumentError(f"missing field {exc}") from exc


def load_system(doc: dict) -> SystemModel:
    return make_system(params_from_document(doc))


def normalize_document(doc: dict) -> dict:
    """Validate by building the system, then re-emit in canonical form."""
    system = load_system(doc)
    return params_to_document(system.params, doc.get("plan"))


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2)

