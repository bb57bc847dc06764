"""The four model families and their torus families.

Hamiltonian kinds live on R^s x T^(s+2k) x R^l x R^l (or the full torus in
the compact case) with the constant structure matrix of ``poisson_core``;
reversible kinds live on R^m x T^n x R^l (or T^m x T^n x T^l) with the
involution (u, phi, q) -> (u, -phi, -q).

Every vector field is written out term by term from the model equations.
For Hamiltonian kinds it is also derived as J grad H, and ``make_system``
refuses to return a model whose two derivations disagree.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import linalg as la
from .exact_poly import PiMultiple, PolyExpr, VarKind, pairwise_brackets, poisson_bracket
from .poisson_core import (
    Dims,
    StructureMatrix,
    StructureSpec,
    TorusKind,
    assemble_structure,
    default_structure,
)


class NegativeConstant(ValueError):
    pass


class NotInFamily(ValueError):
    pass


class InfeasibleRegime(ValueError):
    pass


class CrossCheckFailed(AssertionError):
    pass


class Kind(str, enum.Enum):
    HAM_NONCOMPACT = "ham-noncompact"
    HAM_COMPACT = "ham-compact"
    REV_NONCOMPACT = "rev-noncompact"
    REV_COMPACT = "rev-compact"

    @property
    def hamiltonian(self) -> bool:
        return self in (Kind.HAM_NONCOMPACT, Kind.HAM_COMPACT)

    @property
    def compact(self) -> bool:
        return self in (Kind.HAM_COMPACT, Kind.REV_COMPACT)


def _fractions(xs, name: str) -> tuple[Fraction, ...]:
    out = tuple(la.to_fraction(x) for x in xs)
    for x in out:
        if x < 0:
            raise NegativeConstant(f"{name} constants must be non-negative, got {x}")
    return out


@dataclass(frozen=True)
class HamParams:
    spec: StructureSpec
    zeta: tuple[Fraction, ...]
    xi: tuple[Fraction, ...]
    eta: tuple[Fraction, ...]
    h: PolyExpr
    kind: Kind = Kind.HAM_NONCOMPACT

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.kind.hamiltonian:
            raise ValueError(f"{self.kind.value} is not a Hamiltonian kind")
        d = self.spec.dims
        for name, vals, size in (("zeta", self.zeta, d.s), ("xi", self.xi, d.l), ("eta", self.eta, d.l)):
            if len(vals) != size:
                raise ValueError(f"{name} needs {size} entries, got {len(vals)}")
            object.__setattr__(self, name, tuple(la.to_fraction(x) for x in vals))

    @property
    def dims(self) -> Dims:
        return self.spec.dims


@dataclass(frozen=True)
class RevParams:
    n: int
    m: int
    l: int
    zeta: tuple[Fraction, ...]
    xi: tuple[Fraction, ...]
    h: tuple[PolyExpr, ...]
    kind: Kind = Kind.REV_NONCOMPACT

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind.hamiltonian:
            raise ValueError(f"{self.kind.value} is not a reversible kind")
        for name, vals, size in (("zeta", self.zeta, self.m), ("xi", self.xi, self.l), ("h", self.h, self.n)):
            if len(vals) != size:
                raise ValueError(f"{name} needs {size} entries, got {len(vals)}")
        object.__setattr__(self, "zeta", tuple(la.to_fraction(x) for x in self.zeta))
        object.__setattr__(self, "xi", tuple(la.to_fraction(x) for x in self.xi))
        object.__setattr__(self, "h", tuple(self.h))


@dataclass(frozen=True)
class Involution:
    names: tuple[str, ...]
    signs: tuple[int, ...]
    angle: tuple[bool, ...]

    @property
    def fix_dim(self) -> int:
        return sum(1 for s in self.signs if s == 1)

    @property
    def codim(self) -> int:
        return sum(1 for s in self.signs if s == -1)

    @property
    def type(self) -> tuple[int, int]:
        return (self.codim, self.fix_dim)

    @property
    def fix_components(self) -> int:
        """Connected components of Fix: each negated angle contributes {0, pi}."""
        return 2 ** sum(1 for s, a in zip(self.signs, self.angle) if s == -1 and a)

    def as_map(self) -> dict[str, int]:
        return dict(zip(self.names, self.signs))

    def apply(self, x):
        import numpy as np

        sg = np.asarray(self.signs, dtype=float).reshape((-1,) + (1,) * (np.ndim(x) - 1))
        return sg * x


@dataclass(frozen=True)
class TorusFamily:
    """Family of invariant tori {pinned coordinates fixed, phi arbitrary}.

    ``pinned`` coordinates must vanish (non-compact) or have vanishing sine
    (compact: value 0 or pi); ``free`` ones among u, p, q parametrise the
    family.  ``d_star`` counts the parameters of the symmetric subfamily
    (q = 0, or q in {0, pi} componentwise in the compact case).
    """

    kind: Kind
    pinned: tuple[str, ...]
    free: tuple[str, ...]
    constraints: tuple[str, ...]
    torus_dim: int

    @property
    def d(self) -> int:
        return len(self.free)

    @property
    def d_star(self) -> int:
        return sum(1 for n in self.free if not n.startswith("q"))

    def contains(self, values: dict[str, object]) -> bool:
        return all(_vanishes(values.get(n, 0), self.kind.compact) for n in self.pinned)


def _vanishes(x, compact: bool, tol: float = 1e-12) -> bool:
    """x == 0, or sin x == 0 for compact coordinates."""
    if not compact:
        return float(x) == 0.0 if isinstance(x, float) else la.to_fraction(x) == 0
    if isinstance(x, PiMultiple):
        return x.r.denominator == 1
    if isinstance(x, (int, Fraction)):
        return x == 0
    return abs(math.sin(float(x))) < tol


def _is_zero_or_pi(x, compact: bool) -> bool:
    return _vanishes(x, compact)


@dataclass(frozen=True)
class TorusSpec:
    u0: tuple
    p0: tuple
    q0: tuple
    in_family: bool
    symmetric: bool
    frequency: tuple | None


@dataclass(frozen=True)
class SystemModel:
    params: HamParams | RevParams
    names: tuple[str, ...]
    variables: dict
    vector_field: tuple[PolyExpr, ...]
    involution: Involution
    family: TorusFamily
    H: PolyExpr | None = None
    structure: StructureMatrix | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def kind(self) -> Kind:
        return self.params.kind

    def index(self, prefix: str) -> list[int]:
        """Positions of the coordinates named prefix1, prefix2, ..."""
        return [i for i, n in enumerate(self.names) if n.rstrip("0123456789") == prefix]

    @property
    def angle_mask(self) -> tuple[bool, ...]:
        return tuple(self.variables[n] is VarKind.ANGLE for n in self.names)

    def field_of(self, name: str) -> PolyExpr:
        return self.vector_field[self.names.index(name)]


# -- construction -----------------------------------------------------------


def _names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(count)]


def _tilde(name: str, compact: bool) -> PolyExpr:
    return PolyExpr.sin(name) if compact else PolyExpr.line(name)


def hamiltonian_function(params: HamParams) -> PolyExpr:
    d = params.dims
    c = params.kind.compact
    u, p, q = _names("u", d.s), _names("p", d.l), _names("q", d.l)
    H = params.h
    if d.l:
        pull = PolyExpr.zero()
        for i in range(d.s):
            pull = pull + _tilde(u[i], c) ** 2 * params.zeta[i]
        H = H + _tilde(p[0], c) * pull * d.l
    for v in range(d.l):
        pt, qt = _tilde(p[v], c), _tilde(q[v], c)
        H = H + pt * qt**2 * params.xi[v] + pt**3 * params.eta[v] / 3
    return H


def _ham_field_by_hand(params: HamParams, names, ctx) -> list[PolyExpr]:
    d = params.dims
    c = params.kind.compact
    Z = params.spec.Z
    u, p, q = _names("u", d.s), _names("p", d.l), _names("q", d.l)
    zero = PolyExpr.zero(ctx)
    out: dict[str, PolyExpr] = {}
    for ui in u:
        out[ui] = zero
    # d/du of h plus the pull term
    drift = []
    for i, ui in enumerate(u):
        g = params.h.derivative(ui) if ui in params.h.variables else zero
        if d.l:
            z = params.zeta[i]
            if c:
                g = g + PolyExpr.sin({ui: 2}) * _tilde(p[0], c) * (d.l * z)
            else:
                g = g + PolyExpr.line(ui) * PolyExpr.line(p[0]) * (2 * d.l * z)
        drift.append(g)
    for a in range(d.n):
        acc = zero
        for i in range(d.s):
            if Z[a][i]:
                acc = acc + drift[i] * Z[a][i]
        out[f"phi{a + 1}"] = acc
    pull = zero
    for i in range(d.s):
        pull = pull + _tilde(u[i], c) ** 2 * params.zeta[i]
    for v in range(d.l):
        xi, eta = params.xi[v], params.eta[v]
        pt, qt = _tilde(p[v], c), _tilde(q[v], c)
        if c:
            out[p[v]] = -(pt * PolyExpr.sin({q[v]: 2}) * xi)
            qdot = (qt**2 * xi + pt**2 * eta) * PolyExpr.cos(p[v])
            if v == 0:
                qdot = qdot + pull * PolyExpr.cos(p[0]) * d.l
        else:
            out[p[v]] = -(pt * qt * (2 * xi))
            qdot = qt**2 * xi + pt**2 * eta
            if v == 0:
                qdot = qdot + pull * d.l
        out[q[v]] = qdot
    return [out[n].with_variables(ctx) for n in names]


def hamiltonian_field(H: PolyExpr, structure: StructureMatrix) -> list[PolyExpr]:
    """J grad H, one expression per coordinate."""
    names = structure.dims.coordinate_names()
    grad = H.gradient(names)
    out = []
    for row in structure.J:
        acc = PolyExpr.zero(H.variables)
        for Jab, g in zip(row, grad):
            if Jab and g:
                acc = acc + g * Jab
        out.append(acc)
    return out


def _rev_field_by_hand(params: RevParams, names, ctx) -> list[PolyExpr]:
    c = params.kind.compact
    u, q = _names("u", params.m), _names("q", params.l)
    zero = PolyExpr.zero(ctx)
    out = {ui: zero for ui in u}
    for a in range(params.n):
        out[f"phi{a + 1}"] = params.h[a].with_variables(ctx)
    pull = zero
    for i in range(params.m):
        pull = pull + _tilde(u[i], c) ** 2 * params.zeta[i]
    for v in range(params.l):
        qdot = _tilde(q[v], c) ** 2 * params.xi[v]
        if v == 0:
            qdot = qdot + pull * params.l
        out[q[v]] = qdot
    return [out[n].with_variables(ctx) for n in names]


def _context(names: Sequence[str], compact: bool) -> dict[str, VarKind]:
    return {
        n: VarKind.ANGLE if (compact or n.startswith("phi")) else VarKind.LINE
        for n in names
    }


def _family(kind: Kind, names, consts: dict[str, Fraction], l: int, torus_dim: int) -> TorusFamily:
    pinned, free, constraints = [], [], []
    word = "sin " if kind.compact else ""
    for n in names:
        if n.startswith("phi"):
            continue
        c = consts[n] * (l if n.startswith("u") else 1)
        if c != 0:
            pinned.append(n)
            constraints.append(f"{word}{n} = 0")
        else:
            free.append(n)
    return TorusFamily(kind, tuple(pinned), tuple(free), tuple(constraints), torus_dim)


def make_system(params: HamParams | RevParams) -> SystemModel:
    kind = params.kind
    notes: list[str] = []
    if kind.hamiltonian:
        d = params.dims
        _fractions(params.zeta, "zeta")
        _fractions(params.xi, "xi")
        _fractions(params.eta, "eta")
        structure = assemble_structure(params.spec)
        names = d.coordinate_names()
        ctx = _context(names, kind.compact)
        bad = set(params.h.variables) - set(_names("u", d.s))
        if bad:
            raise ValueError(f"h may only depend on u, found {sorted(bad)}")
        h = params.h.with_variables({n: ctx[n] for n in _names("u", d.s)})
        params = HamParams(params.spec, params.zeta, params.xi, params.eta, h, kind)
        H = hamiltonian_function(params).with_variables(ctx)
        by_hand = _ham_field_by_hand(params, names, ctx)
        derived = hamiltonian_field(H, structure)
        for n, a, b in zip(names, by_hand, derived):
            if a != b:
                raise CrossCheckFailed(f"d{n}/dt: hand-coded {a} differs from J grad H = {b}")
        signs = tuple(-1 if (n.startswith("phi") or n.startswith("q")) else 1 for n in names)
        consts = {}
        for i in range(d.s):
            consts[f"u{i + 1}"] = params.zeta[i]
        for v in range(d.l):
            consts[f"p{v + 1}"] = params.eta[v]
            consts[f"q{v + 1}"] = params.xi[v]
        family = _family(kind, names, consts, d.l, d.n)
        if d.s == 0:
            notes.append("equilibrium torus: s = 0, every torus of the family consists of equilibria")
        return SystemModel(
            params, names, ctx, tuple(by_hand),
            Involution(names, signs, tuple(ctx[n] is VarKind.ANGLE for n in names)),
            family, H, structure, tuple(notes),
        )
    _fractions(params.zeta, "zeta")
    _fractions(params.xi, "xi")
    names = tuple(_names("u", params.m) + _names("phi", params.n) + _names("q", params.l))
    ctx = _context(names, kind.compact)
    u_ctx = {n: ctx[n] for n in _names("u", params.m)}
    hs = []
    for a, ha in enumerate(params.h):
        bad = set(ha.variables) - set(u_ctx)
        if bad:
            raise ValueError(f"h{a + 1} may only depend on u, found {sorted(bad)}")
        hs.append(ha.with_variables(u_ctx))
    params = RevParams(params.n, params.m, params.l, params.zeta, params.xi, tuple(hs), kind)
    field_ = _rev_field_by_hand(params, names, ctx)
    signs = tuple(-1 if (n.startswith("phi") or n.startswith("q")) else 1 for n in names)
    consts = {f"u{i + 1}": params.zeta[i] for i in range(params.m)}
    consts.update({f"q{v + 1}": params.xi[v] for v in range(params.l)})
    family = _family(kind, names, consts, params.l, params.n)
    return SystemModel(
        params, names, ctx, tuple(field_),
        Involution(names, signs, tuple(ctx[n] is VarKind.ANGLE for n in names)),
        family, None, None, tuple(notes),
    )


def torus_family(system: SystemModel) -> TorusFamily:
    return system.family


# -- tori -------------------------------------------------------------------


def make_torus(system: SystemModel, u0: Sequence, p0: Sequence = (), q0: Sequence = ()) -> TorusSpec:
    """The torus {u = u0, p = p0, q = q0, phi arbitrary}; p0 is ignored for
    reversible kinds (they have no p)."""
    kind = system.kind
    names_u = [n for n in system.names if n.startswith("u")]
    names_p = [n for n in system.names if n.startswith("p") and not n.startswith("phi")]
    names_q = [n for n in system.names if n.startswith("q")]
    u0, p0, q0 = tuple(u0), tuple(p0), tuple(q0)
    if not kind.hamiltonian:
        p0 = ()
    for nm, vals, want in (("u0", u0, names_u), ("p0", p0, names_p), ("q0", q0, names_q)):
        if len(vals) != len(want):
            raise ValueError(f"{nm} needs {len(want)} entries, got {len(vals)}")
    values = dict(zip(names_u, u0)) | dict(zip(names_p, p0)) | dict(zip(names_q, q0))
    inside = system.family.contains(values)
    symmetric = all(_is_zero_or_pi(x, kind.compact) for x in q0)
    freq = _frequency_at(system, u0) if inside else None
    return TorusSpec(u0, p0, q0, inside, symmetric, freq)


def _frequency_at(system: SystemModel, u0: Sequence) -> tuple:
    params = system.params
    point = {f"u{i + 1}": x for i, x in enumerate(u0)}
    if system.kind.hamiltonian:
        d = params.dims
        grad = [
            params.h.derivative(f"u{i + 1}").evaluate(point) if f"u{i + 1}" in params.h.variables else Fraction(0)
            for i in range(d.s)
        ]
        Z = params.spec.Z
        return tuple(sum((Z[a][i] * grad[i] for i in range(d.s)), Fraction(0)) for a in range(d.n))
    return tuple(ha.evaluate(point) for ha in params.h)


def torus_frequency(system: SystemModel, torus: TorusSpec) -> tuple:
    if not torus.in_family:
        raise NotInFamily("frequency is only defined here for tori of the family")
    return _frequency_at(system, torus.u0)


def is_symmetric_torus(system: SystemModel, torus: TorusSpec) -> bool:
    if not torus.in_family:
        raise NotInFamily("torus is not a member of the family")
    return torus.symmetric


# -- planner ------------------------------------------------------------------


@dataclass(frozen=True)
class HamSkeleton:
    dims: Dims
    target: TorusKind
    d: int
    zeta_zero: tuple[bool, ...]
    xi_zero: tuple[bool, ...]
    eta_zero: tuple[bool, ...]


@dataclass(frozen=True)
class RevSkeleton:
    n: int
    m: int
    l: int
    d: int
    d_star: int
    zeta_zero: tuple[bool, ...]
    xi_zero: tuple[bool, ...]


def plan_parameters(N: int, n: int, target: TorusKind | str, d: int) -> HamSkeleton:
    """(s, k, l) and a zero pattern realising an n-torus family of the given
    class with d parameters in a system with N degrees of freedom.

    Non-uniqueness of (s, k, l) is resolved by fixed recipes: isotropic
    s = n, k = 0, l = N - n; atropic with n >= N: s = 2N - n - 2,
    k = n - N + 1, l = 1; atropic with n < N: s = n - 2, k = 1,
    l = N - n + 1; coisotropic kinds are forced (l = 0).
    """
    target = TorusKind.parse(target) if isinstance(target, str) else TorusKind(target)
    if N < 1 or n < 0:
        raise InfeasibleRegime(f"need N >= 1 and n >= 0, got N={N}, n={n}")
    if target is TorusKind.LAGRANGIAN:
        if n != N:
            raise InfeasibleRegime(f"Lagrangian tori need n = N, got n={n}, N={N}")
        s, k, l = N, 0, 0
    elif target is TorusKind.STRICTLY_COISOTROPIC:
        if not (N + 1 <= n <= 2 * N - 1):
            raise InfeasibleRegime(f"strictly coisotropic tori need N+1 <= n <= 2N-1, got n={n}, N={N}")
        s, k, l = 2 * N - n, n - N, 0
    elif target is TorusKind.STRICTLY_ISOTROPIC:
        if not (1 <= n <= N - 1):
            raise InfeasibleRegime(f"strictly isotropic tori need 1 <= n <= N-1, got n={n}, N={N}")
        s, k, l = n, 0, N - n
    else:
        if not (3 <= n <= 2 * N - 3):
            raise InfeasibleRegime(f"atropic tori need 3 <= n <= 2N-3, got n={n}, N={N}")
        if n >= N:
            s, k, l = 2 * N - n - 2, n - N + 1, 1
        else:
            s, k, l = n - 2, 1, N - n + 1
    dims = Dims(s, k, l)
    total = s + 2 * l
    if l == 0:
        if d != s:
            raise InfeasibleRegime(f"coisotropic families always have d = s = {s}, got d={d}")
        return HamSkeleton(dims, target, d, (True,) * s, (), ())
    if not 0 <= d <= total:
        raise InfeasibleRegime(f"need 0 <= d <= 2N-n = {total}, got d={d}")
    zero = [i < d for i in range(total)]
    return HamSkeleton(dims, target, d, tuple(zero[:s]), tuple(zero[s : s + l]), tuple(zero[s + l :]))


def plan_reversible(n: int, m: int, l: int, d_star: int, d: int) -> RevSkeleton:
    if min(n, m, l) < 0:
        raise InfeasibleRegime("n, m, l must be non-negative")
    if l == 0:
        if d_star != m or d != m:
            raise InfeasibleRegime(f"with l = 0 the whole space is foliated: need d* = d = m = {m}")
        return RevSkeleton(n, m, l, d, d_star, (True,) * m, ())
    if not 0 <= d_star <= m:
        raise InfeasibleRegime(f"need 0 <= d* <= m = {m}, got d*={d_star}")
    if not d_star <= d <= d_star + l:
        raise InfeasibleRegime(f"need d* <= d <= d* + l, got d*={d_star}, d={d}, l={l}")
    return RevSkeleton(
        n, m, l, d, d_star,
        tuple(i < d_star for i in range(m)),
        tuple(i < d - d_star for i in range(l)),
    )


def realize_frequency(dims: Dims, omega: Sequence) -> tuple[la.Matrix, la.Vector]:
    """(Z, c) with Z c = omega.

    Tries the default Z first; when omega is outside its column space (the
    usual case for k >= 1) the first column of Z is omega itself, completed
    to rank s by standard basis vectors, and c = e_1.
    """
    omega = tuple(la.to_fraction(x) for x in omega)
    s, n = dims.s, dims.n
    if len(omega) != n:
        raise InfeasibleRegime(f"omega needs {n} entries, got {len(omega)}")
    if s == 0:
        if any(omega):
            raise InfeasibleRegime("s = 0 tori consist of equilibria: omega must vanish")
        return tuple(() for _ in range(n)), ()
    Z0 = default_structure(dims).Z
    c = la.solve(Z0, omega)
    if c is not None:
        return Z0, c
    cols = [omega]
    for j in range(n):
        if len(cols) == s:
            break
        e = tuple(Fraction(int(i == j)) for i in range(n))
        if la.span_dim(cols + [e]) == len(cols) + 1:
            cols.append(e)
    Z = la.transpose(tuple(cols))
    return Z, tuple(Fraction(int(i == 0)) for i in range(s))


def linear_h(c: Sequence[Fraction], compact: bool) -> PolyExpr:
    """sum c_i u_i, or sum c_i sin u_i on the torus."""
    h = PolyExpr.zero()
    for i, ci in enumerate(c):
        if ci:
            h = h + _tilde(f"u{i + 1}", compact) * ci
    return h


def build_ham_params(skel: HamSkeleton, omega: Sequence, kind: Kind = Kind.HAM_NONCOMPACT, positive=1) -> HamParams:
    kind = Kind(kind)
    dims = skel.dims
    Z, c = realize_frequency(dims, omega)
    spec = default_structure(dims, Z)
    pos = la.to_fraction(positive)
    pick = lambda zeros: tuple(Fraction(0) if z else pos for z in zeros)  # noqa: E731
    h = linear_h(c, kind.compact).with_variables(
        {f"u{i + 1}": VarKind.ANGLE if kind.compact else VarKind.LINE for i in range(dims.s)}
    )
    return HamParams(spec, pick(skel.zeta_zero), pick(skel.xi_zero), pick(skel.eta_zero), h, kind)


def build_rev_params(skel: RevSkeleton, omega: Sequence, kind: Kind = Kind.REV_NONCOMPACT, positive=1) -> RevParams:
    kind = Kind(kind)
    omega = tuple(la.to_fraction(x) for x in omega)
    if len(omega) != skel.n:
        raise InfeasibleRegime(f"omega needs {skel.n} entries, got {len(omega)}")
    pos = la.to_fraction(positive)
    pick = lambda zeros: tuple(Fraction(0) if z else pos for z in zeros)  # noqa: E731
    h = tuple(PolyExpr.const(w) for w in omega)
    return RevParams(skel.n, skel.m, skel.l, pick(skel.zeta_zero), pick(skel.xi_zero), h, kind)


def feasible_ham_regimes(N_max: int):
    """Every (N, n, class, d) the planner accepts with N <= N_max."""
    for N in range(1, N_max + 1):
        for n in range(0, 2 * N):
            for target in TorusKind:
                for d in range(0, 2 * N - n + 1):
                    try:
                        plan_parameters(N, n, target, d)
                    except InfeasibleRegime:
                        continue
                    yield N, n, target, d


# -- first integrals ------------------------------------------------------------


@dataclass(frozen=True)
class IntegralSet:
    names: tuple[str, ...]
    integrals: tuple[PolyExpr, ...]
    brackets: tuple[tuple[PolyExpr, ...], ...]
    coordinate_names: tuple[str, ...] | None = None
    coordinate_brackets: la.Matrix | None = None

    def in_involution(self) -> bool:
        return all(b.is_zero() for row in self.brackets for b in row)


def _pair_integral(params: HamParams, v: int) -> PolyExpr:
    c = params.kind.compact
    p, q = f"p{v + 1}", f"q{v + 1}"
    xi, eta = params.xi[v], params.eta[v]
    pt, qt = _tilde(p, c), _tilde(q, c)
    if xi + eta > 0:
        return pt * qt**2 * xi + pt**3 * eta / 3
    # any function of (p, q) conserved by the flow; p itself is, since dp/dt = -2 xi p q = 0
    return pt


def first_integrals(system: SystemModel) -> IntegralSet:
    if not system.kind.hamiltonian:
        raise ValueError("first integrals are defined for Hamiltonian kinds")
    params: HamParams = system.params
    d = params.dims
    st = system.structure
    ctx = system.variables
    names: list[str] = []
    funcs: list[PolyExpr] = []
    with_H = d.l >= 1 and sum(params.zeta) > 0
    if with_H:
        names.append("H")
        funcs.append(system.H)
    for i in range(d.s):
        names.append(f"u{i + 1}")
        # on the torus u_i itself is not a Fourier polynomial; sin u_i is conserved too
        funcs.append(_tilde(f"u{i + 1}", system.kind.compact).with_variables(ctx))
    first = 1 if with_H else 0
    for v in range(first, d.l):
        names.append(f"f{v + 1}")
        funcs.append(_pair_integral(params, v).with_variables(ctx))
    brackets = pairwise_brackets(funcs, st)
    coord_names = coord_P = None
    if system.family.d == d.s + 2 * d.l:
        coord_names = tuple(_names("u", d.s) + _names("p", d.l) + _names("q", d.l))
        if not system.kind.compact:
            cf = [PolyExpr.line(n).with_variables(ctx) for n in coord_names]
            P = pairwise_brackets(cf, st)
            coord_P = tuple(tuple(b.constant_value().re for b in row) for row in P)
        else:
            # coordinate functions on the torus are not Fourier polynomials; their
            # brackets are the matching entries of J
            idx = [d.coordinate_names().index(n) for n in coord_names]
            coord_P = tuple(tuple(st.J[a][b] for b in idx) for a in idx)
    return IntegralSet(
        tuple(names), tuple(funcs), tuple(tuple(r) for r in brackets), coord_names, coord_P
    )


def displayed_bracket_matrix(s: int, l: int) -> la.Matrix:
    """[[0, 0, 0], [0, 0, -I_l], [0, I_l, 0]] with blocks s, l, l."""
    return la.block(
        [
            [la.zeros(s, s), la.zeros(s, l), la.zeros(s, l)],
            [la.zeros(l, s), la.zeros(l, l), la.neg(la.identity(l))],
            [la.zeros(l, s), la.identity(l), la.zeros(l, l)],
        ],
        [s, l, l],
        [s, l, l],
    )


# -- reversibility -------------------------------------------------------------


@dataclass(frozen=True)
class ReversibilityVerdict:
    reversible: bool
    type: tuple[int, int]
    fix_dim: int
    fix_components: int
    residuals: tuple[tuple[str, PolyExpr], ...]


def reversibility_check(system: SystemModel, involution: Involution | None = None) -> ReversibilityVerdict:
    """Check DG X + X o G = 0 coordinatewise for a sign-pattern involution."""
    G = involution or system.involution
    sg = G.as_map()
    residuals = []
    for name, X in zip(system.names, system.vector_field):
        r = X * sg[name] + X.reflect(sg)
        if not r.is_zero():
            residuals.append((name, r))
    return ReversibilityVerdict(not residuals, G.type, G.fix_dim, G.fix_components, tuple(residuals))


def identity_involution(system: SystemModel) -> Involution:
    return Involution(system.names, (1,) * len(system.names), system.angle_mask)


def family_substitutions(system: SystemModel):
    """Exact substitutions putting a point on the family: pinned coordinates
    set to 0 (non-compact) or to each of 0, pi (compact)."""
    pinned = system.family.pinned
    if not system.kind.compact:
        yield {n: 0 for n in pinned}
        return
    for combo in itertools.product((0, PiMultiple(1)), repeat=len(pinned)):
        yield dict(zip(pinned, combo))


def bracket_matrix_rank(P: la.Matrix) -> int:
    return la.rank(P) if P else 0
