"""Constant structure matrices and the symplectic type of the angle tori.

Coordinates are ordered ``(u, phi, p, q)`` with ``u`` in R^s, ``phi`` on the
(s+2k)-torus and ``p, q`` in R^l.  The structure (Poisson) matrix is

    [[0, -Z^T, 0, 0],
     [Z,  L,   0, 0],
     [0,  0,   0, -I],
     [0,  0,   I,  0]]

and the symplectic form matrix is its inverse ``W = J^{-1}``.  All of this
module is exact rational arithmetic.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import linalg as la
from .linalg import Matrix, Vector


class StructureError(ValueError):
    """Base class for invalid structure data."""


class RankDeficientZ(StructureError):
    pass


class NotSkew(StructureError):
    pass


class SingularJ(StructureError):
    pass


@dataclass(frozen=True)
class Dims:
    s: int
    k: int
    l: int

    def __post_init__(self):
        for name in ("s", "k", "l"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def N(self) -> int:
        """Degrees of freedom."""
        return self.s + self.k + self.l

    @property
    def n(self) -> int:
        """Dimension of the angle tori."""
        return self.s + 2 * self.k

    @property
    def phase_dim(self) -> int:
        return 2 * self.N

    def coordinate_names(self) -> tuple[str, ...]:
        return (
            tuple(f"u{i + 1}" for i in range(self.s))
            + tuple(f"phi{a + 1}" for a in range(self.n))
            + tuple(f"p{v + 1}" for v in range(self.l))
            + tuple(f"q{v + 1}" for v in range(self.l))
        )

    def slices(self) -> dict[str, slice]:
        s, n, l = self.s, self.n, self.l
        return {
            "u": slice(0, s),
            "phi": slice(s, s + n),
            "p": slice(s + n, s + n + l),
            "q": slice(s + n + l, s + n + 2 * l),
        }


@dataclass(frozen=True)
class StructureSpec:
    dims: Dims
    Z: Matrix
    L: Matrix

    def __post_init__(self):
        object.__setattr__(self, "Z", la.matrix(self.Z) if self.Z else ())
        object.__setattr__(self, "L", la.matrix(self.L) if self.L else ())
        n, s = self.dims.n, self.dims.s
        if len(self.Z) != n or any(len(r) != s for r in self.Z):
            raise ValueError(f"Z must be {n}x{s}")
        if len(self.L) != n or any(len(r) != n for r in self.L):
            raise ValueError(f"L must be {n}x{n}")


@dataclass(frozen=True)
class StructureMatrix:
    spec: StructureSpec
    J: Matrix
    W: Matrix

    @property
    def dims(self) -> Dims:
        return self.spec.dims

    def block(self, which: str, rows: str, cols: str) -> Matrix:
        m = self.J if which == "J" else self.W
        sl = self.dims.slices()
        r, c = sl[rows], sl[cols]
        return tuple(tuple(row[c]) for row in m[r])


class TorusKind(str, enum.Enum):
    LAGRANGIAN = "Lagrangian"
    STRICTLY_ISOTROPIC = "StrictlyIsotropic"
    STRICTLY_COISOTROPIC = "StrictlyCoisotropic"
    ATROPIC = "Atropic"

    @classmethod
    def parse(cls, text: str) -> "TorusKind":
        key = text.strip().lower().replace("-", "").replace("_", "")
        for member in cls:
            if member.value.lower() == key or member.value.lower().replace("strictly", "") == key:
                return member
        raise ValueError(f"unknown torus class {text!r}")


@dataclass(frozen=True)
class TorusClass:
    kind: TorusKind
    intersection_dim: int
    isotropic: bool
    coisotropic: bool


def expected_kind(k: int, l: int) -> TorusKind:
    """The class the (k, l) pattern predicts; used only as a cross-check."""
    if k == 0 and l == 0:
        return TorusKind.LAGRANGIAN
    if k == 0:
        return TorusKind.STRICTLY_ISOTROPIC
    if l == 0:
        return TorusKind.STRICTLY_COISOTROPIC
    return TorusKind.ATROPIC


def canonical_skew(k: int) -> Matrix:
    """The 2k x 2k matrix [[0, -I_k], [I_k, 0]]."""
    return la.block(
        [[la.zeros(k, k), la.neg(la.identity(k))], [la.identity(k), la.zeros(k, k)]],
        [k, k],
        [k, k],
    )


def default_structure(dims: Dims, Z: Matrix | None = None) -> StructureSpec:
    """Simplest valid (Z, L) for the given dimensions.

    k = 0: Z = I_s and L = 0.  k >= 1: Z = (0; I_s) unless supplied, and
    L = K S K^T with K a basis of ker Z^T and S canonical, which makes J
    non-singular for any full-rank Z.  For Z = (0; I_s) this is exactly the
    block form with L_sharp = S in the top-left corner.
    """
    s, k, n = dims.s, dims.k, dims.n
    if Z is None:
        Z = la.block([[la.zeros(2 * k, s)], [la.identity(s)]], [2 * k, s], [s]) if s or k else ()
    Z = la.matrix(Z) if Z else tuple(() for _ in range(n))
    if k == 0:
        return StructureSpec(dims, Z, la.zeros(n, n))
    K = la.nullspace(la.transpose(Z, n) if s else (), ncols=n)
    if len(K) != 2 * k:
        raise RankDeficientZ(f"rank Z = {n - len(K)} < s = {s}")
    Kmat = la.transpose(K)  # n x 2k
    L = la.matmul(la.matmul(Kmat, canonical_skew(k)), la.transpose(Kmat))
    return StructureSpec(dims, Z, L)


def assemble_structure(spec: StructureSpec) -> StructureMatrix:
    dims = spec.dims
    s, n, l = dims.s, dims.n, dims.l
    Z, L = spec.Z, spec.L
    if s and la.rank(Z) != s:
        raise RankDeficientZ(f"Z has rank {la.rank(Z)} but must have rank s = {s}")
    if not la.is_skew(L):
        raise NotSkew("L must satisfy L = -L^T")
    ZT = la.transpose(Z, s) if n else la.zeros(s, 0)
    top = la.block(
        [[la.zeros(s, s), la.neg(ZT)], [Z if n else (), L]],
        [s, n],
        [s, n],
    )
    pq = canonical_skew(l)
    size = 2 * dims.N
    m = 2 * s + 2 * dims.k
    J = la.block(
        [[top, la.zeros(m, 2 * l)], [la.zeros(2 * l, m), pq]],
        [m, 2 * l],
        [m, 2 * l],
    )
    assert len(J) == size
    if la.det(J) == 0:
        raise SingularJ(
            "det J = 0: the restriction of L to ker Z^T is degenerate"
            + (" (with L in block form this means det L_sharp = 0)" if dims.k else "")
        )
    W = la.inverse(J)
    structure = StructureMatrix(spec, J, W)
    _check_structure(structure)
    return structure


def _check_structure(st: StructureMatrix) -> None:
    size = 2 * st.dims.N
    assert la.is_skew(st.J)
    assert la.matmul(st.W, st.J) == la.identity(size)
    assert st.block("J", "p", "q") == la.neg(la.identity(st.dims.l))
    assert st.block("J", "q", "p") == la.identity(st.dims.l)
    assert is_exact_form(st) == (st.dims.k == 0)


def is_exact_form(st: StructureMatrix) -> bool:
    """True iff the angle-angle block of W vanishes."""
    return all(x == 0 for row in st.block("W", "phi", "phi") for x in row)


def _angle_basis(dims: Dims) -> tuple[Vector, ...]:
    size, start = 2 * dims.N, dims.s
    return tuple(tuple(Fraction(int(i == start + a)) for i in range(size)) for a in range(dims.n))


def torus_tangent_complement(structure: StructureMatrix) -> tuple[Vector, ...]:
    """Basis of the W-orthogonal complement of the angle directions."""
    dims = structure.dims
    size = 2 * dims.N
    W = structure.W
    # v^T W t = 0 for every angle direction t: rows are the columns W t.
    rows = tuple(tuple(W[i][dims.s + a] for i in range(size)) for a in range(dims.n))
    return la.nullspace(rows, ncols=size)


def classify_torus(structure: StructureMatrix) -> TorusClass:
    T = _angle_basis(structure.dims)
    Tperp = torus_tangent_complement(structure)
    dim_T, dim_Tp = len(T), len(Tperp)
    dim_sum = la.span_dim(list(T) + list(Tperp))
    inter = dim_T + dim_Tp - dim_sum
    isotropic = all(la.in_span(t, Tperp) for t in T)
    coisotropic = all(la.in_span(v, T) for v in Tperp)
    if isotropic and coisotropic:
        kind = TorusKind.LAGRANGIAN
    elif isotropic:
        kind = TorusKind.STRICTLY_ISOTROPIC
    elif coisotropic:
        kind = TorusKind.STRICTLY_COISOTROPIC
    else:
        kind = TorusKind.ATROPIC
    return TorusClass(kind, inter, isotropic, coisotropic)


# -- JSON ---------------------------------------------------------------


def matrix_to_json(a: Matrix) -> list[list[str]]:
    return [[la.fraction_str(x) for x in row] for row in a]


def spec_to_dict(spec: StructureSpec) -> dict:
    d = spec.dims
    return {
        "dims": {"s": d.s, "k": d.k, "l": d.l},
        "Z": matrix_to_json(spec.Z),
        "L": matrix_to_json(spec.L),
    }


def _parse_entries(rows: Sequence[Sequence], name: str) -> Matrix:
    for row in rows:
        for x in row:
            if isinstance(x, float):
                raise StructureError(f"{name}: floats are not accepted, use \"p/q\" strings")
    return la.matrix(rows) if rows else ()


def spec_from_dict(doc: dict) -> StructureSpec:
    dd = doc["dims"]
    dims = Dims(int(dd["s"]), int(dd["k"]), int(dd["l"]))
    Z = _parse_entries(doc.get("Z", []), "Z")
    L = _parse_entries(doc.get("L", []), "L")
    if not Z:
        Z = tuple(() for _ in range(dims.n))
    return StructureSpec(dims, Z, L)


def spec_to_json(spec: StructureSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2)


def spec_from_json(text: str) -> StructureSpec:
    return spec_from_dict(json.loads(text))
