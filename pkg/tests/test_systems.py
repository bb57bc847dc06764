import math
import random
from fractions import Fraction as F

import pytest
import sympy as sp
from hypothesis import given, strategies as st

import oracles
from kronecker_tori import linalg as la
from kronecker_tori.exact_poly import PI, PolyExpr, VarKind
from kronecker_tori.poisson_core import Dims, StructureSpec, TorusKind, classify_torus, default_structure
from kronecker_tori.systems import (
    HamParams,
    InfeasibleRegime,
    Kind,
    NegativeConstant,
    NotInFamily,
    RevParams,
    build_ham_params,
    build_rev_params,
    displayed_bracket_matrix,
    feasible_ham_regimes,
    first_integrals,
    identity_involution,
    is_symmetric_torus,
    make_system,
    make_torus,
    plan_parameters,
    plan_reversible,
    realize_frequency,
    reversibility_check,
    torus_frequency,
)

OMEGA = F(7, 5)


def single_pair(kind=Kind.HAM_NONCOMPACT, zeta=1, xi=1, eta=1):
    c = kind.compact
    u = PolyExpr.sin("u1") if c else PolyExpr.line("u1")
    spec = StructureSpec(Dims(1, 0, 1), [[1]], [[0]])
    return make_system(HamParams(spec, (zeta,), (xi,), (eta,), u * OMEGA, kind))


def test_noncompact_example_field():
    sys_ = single_pair()
    u, p, q = (PolyExpr.line(n) for n in ("u1", "p1", "q1"))
    assert sys_.field_of("u1").is_zero()
    assert sys_.field_of("phi1") == (u * p * 2 + OMEGA).with_variables(sys_.variables)
    assert sys_.field_of("p1") == (p * q * -2).with_variables(sys_.variables)
    assert sys_.field_of("q1") == (q**2 + p**2 + u**2).with_variables(sys_.variables)


def test_reversible_example_field():
    sys_ = make_system(RevParams(1, 0, 1, (), (1,), (PolyExpr.const(OMEGA),)))
    assert sys_.field_of("phi1") == PolyExpr.const(OMEGA)
    assert sys_.field_of("q1") == (PolyExpr.line("q1") ** 2).with_variables(sys_.variables)


def test_negative_constant():
    with pytest.raises(NegativeConstant):
        single_pair(zeta=-1)


def _numeric_compare(system, H_sym, u, p, q, compact):
    """Compare the package's field with a sympy J grad H at random points."""
    d = system.params.dims
    phi = sp.symbols(f"phi1:{d.n + 1}", real=True) if d.n else ()
    coords = list(u) + list(phi) + list(p) + list(q)
    J = sp.Matrix([[sp.Rational(x.numerator, x.denominator) for x in row] for row in system.structure.J])
    want = oracles.field_sympy(H_sym, J, coords)
    rng = random.Random(0)
    for _ in range(3):
        vals = {c: rng.uniform(-1.5, 1.5) for c in coords}
        point = {str(c): v for c, v in vals.items()}
        for w, X in zip(want, system.vector_field):
            assert float(w.subs(vals)) == pytest.approx(X.evaluate(point), abs=1e-10)


@pytest.mark.parametrize("kind", [Kind.HAM_NONCOMPACT, Kind.HAM_COMPACT])
@pytest.mark.parametrize("dims", [Dims(1, 0, 1), Dims(2, 1, 2), Dims(1, 1, 1), Dims(3, 0, 2)], ids=str)
def test_field_matches_sympy_oracle(kind, dims):
    zeta = tuple(F(i + 1, 2) for i in range(dims.s))
    xi = tuple(F(2 * v + 1, 3) for v in range(dims.l))
    eta = tuple(F(v + 2) for v in range(dims.l))
    ctx = {f"u{i + 1}": VarKind.ANGLE if kind.compact else VarKind.LINE for i in range(dims.s)}
    tl = PolyExpr.sin if kind.compact else PolyExpr.line
    h = sum((tl(f"u{i + 1}") * (i + 1) for i in range(dims.s)), PolyExpr.zero()).with_variables(ctx)
    system = make_system(HamParams(default_structure(dims), zeta, xi, eta, h, kind))
    t = sp.sin if kind.compact else (lambda z: z)
    hfun = lambda u: sum((i + 1) * t(u[i]) for i in range(dims.s))  # noqa: E731
    H, u, p, q = oracles.hamiltonian_sympy(dims.s, dims.l, zeta, xi, eta, hfun, kind.compact)
    _numeric_compare(system, H, u, p, q, kind.compact)


# -- families and tori -------------------------------------------------------


def test_l_zero_family_is_everything():
    sys_ = make_system(build_ham_params(plan_parameters(2, 2, "Lagrangian", 2), (1, 2)))
    assert sys_.family.d == 2 and sys_.family.pinned == ()


def test_positive_constants_give_single_torus():
    sys_ = single_pair()
    assert sys_.family.d == 0
    assert make_torus(sys_, [0], [0], [0]).in_family
    assert not make_torus(sys_, [F(1, 10)], [0], [0]).in_family


def test_reversible_zero_zeta_family():
    sys_ = make_system(RevParams(1, 2, 1, (0, 0), (1,), (PolyExpr.const(1),)))
    assert (sys_.family.d, sys_.family.d_star) == (2, 2)


def test_linear_h_frequency():
    sys_ = single_pair()
    assert torus_frequency(sys_, make_torus(sys_, [0], [0], [0])) == (OMEGA,)


def test_reversible_frequency_constant_on_family():
    sys_ = make_system(build_rev_params(plan_reversible(2, 2, 1, 1, 2), (1, F(3, 2))))
    for u in ([0, 0], [5, 0], [F(-7, 3), 0]):
        tor = make_torus(sys_, u, (), [0])
        if tor.in_family:
            assert torus_frequency(sys_, tor) == (1, F(3, 2))


def test_compact_frequency_is_Z_c():
    sys_ = single_pair(Kind.HAM_COMPACT)
    tor = make_torus(sys_, [0], [0], [0])
    assert torus_frequency(sys_, tor) == (OMEGA,)


def test_frequency_outside_family():
    sys_ = single_pair()
    with pytest.raises(NotInFamily):
        torus_frequency(sys_, make_torus(sys_, [1], [0], [0]))


def test_symmetric_tori():
    sk = plan_parameters(3, 2, "isotropic", 1)
    nc = make_system(build_ham_params(sk, (1, 2)))
    assert is_symmetric_torus(nc, make_torus(nc, [1, 0], [0], [0]))
    cp = make_system(build_ham_params(plan_parameters(4, 2, "isotropic", 1), (1, 2), Kind.HAM_COMPACT))
    tor = make_torus(cp, [PI, 0], [0, 0], [PI, 0])
    assert tor.in_family and is_symmetric_torus(cp, tor)
    rev = make_system(build_rev_params(plan_reversible(1, 0, 1, 0, 1), (1,)))
    assert not is_symmetric_torus(rev, make_torus(rev, [], (), [1]))
    assert is_symmetric_torus(rev, make_torus(rev, [], (), [0]))


# -- planner -------------------------------------------------------------------


@pytest.mark.parametrize(
    "N,n,cls,dims",
    [(5, 3, "StrictlyIsotropic", (3, 0, 2)), (3, 3, "Atropic", (1, 1, 1)), (4, 3, "Atropic", (1, 1, 2))],
)
def test_planner_examples(N, n, cls, dims):
    d = plan_parameters(N, n, cls, 0).dims
    assert (d.s, d.k, d.l) == dims


def test_planner_names_violated_inequality():
    with pytest.raises(InfeasibleRegime, match="3 <= n <= 2N-3"):
        plan_parameters(2, 2, "atropic", 0)


REGIMES = list(feasible_ham_regimes(5))


def test_regime_count_is_stable():
    assert len(REGIMES) == 134


@pytest.mark.parametrize("kind", [Kind.HAM_NONCOMPACT, Kind.HAM_COMPACT])
def test_every_planned_regime(kind):
    for N, n, target, d in REGIMES:
        sk = plan_parameters(N, n, target, d)
        assert sk.dims.N == N and sk.dims.n == n
        omega = tuple(F(j + 1, j + 2) for j in range(n))
        if sk.dims.s == 0:
            omega = (0,) * n
        sys_ = make_system(build_ham_params(sk, omega, kind))
        assert sys_.family.d == d
        assert classify_torus(sys_.structure).kind is target
        tor = make_torus(sys_, [0] * sk.dims.s, [0] * sk.dims.l, [0] * sk.dims.l)
        assert torus_frequency(sys_, tor) == tuple(la.to_fraction(w) for w in omega)


@given(st.lists(st.fractions(-3, 3, max_denominator=5), min_size=1, max_size=5), st.data())
def test_realize_frequency_solves(omega, data):
    n = len(omega)
    s = data.draw(st.integers(1, n))
    if (n - s) % 2:
        s -= 1
    if s == 0:
        return
    dims = Dims(s, (n - s) // 2, 1)
    if not any(omega):
        return
    Z, c = realize_frequency(dims, omega)
    assert la.matvec(Z, c) == tuple(omega)
    assert la.rank(Z) == s


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.data())
def test_reversible_planner_bounds(n, m, l, data):
    d_star = data.draw(st.integers(0, m))
    d = data.draw(st.integers(d_star, d_star + l))
    if l == 0:
        d_star = d = m
    sk = plan_reversible(n, m, l, d_star, d)
    sys_ = make_system(build_rev_params(sk, tuple(range(1, n + 1))))
    fam = sys_.family
    assert (fam.d, fam.d_star) == (d, d_star)
    assert fam.d_star <= fam.d <= fam.d_star + l


# -- first integrals -----------------------------------------------------------


@pytest.mark.parametrize("kind", [Kind.HAM_NONCOMPACT, Kind.HAM_COMPACT])
def test_generic_integrals_in_involution(kind):
    sys_ = make_system(build_ham_params(plan_parameters(4, 3, "atropic", 0), (1, 2, 3), kind))
    ints = first_integrals(sys_)
    assert ints.names[0] == "H" and ints.in_involution()
    for f in ints.integrals:
        from kronecker_tori.exact_poly import poisson_bracket

        assert poisson_bracket(f, sys_.H, sys_.structure).is_zero()


def test_full_family_bracket_matrix():
    sk = plan_parameters(3, 2, "isotropic", 4)
    sys_ = make_system(build_ham_params(sk, (1, 2)))
    ints = first_integrals(sys_)
    s, l = sk.dims.s, sk.dims.l
    assert ints.coordinate_brackets == displayed_bracket_matrix(s, l)
    assert la.rank(ints.coordinate_brackets) == 2 * l


def test_l_zero_integrals():
    sys_ = make_system(build_ham_params(plan_parameters(2, 2, "Lagrangian", 2), (1, 2)))
    ints = first_integrals(sys_)
    assert ints.in_involution() and "H" not in ints.names
    assert la.rank(ints.coordinate_brackets) == 0


# -- reversibility -------------------------------------------------------------


@pytest.mark.parametrize("kind", list(Kind))
def test_reversibility_types(kind):
    if kind.hamiltonian:
        sk = plan_parameters(4, 3, "atropic", 0)
        sys_ = make_system(build_ham_params(sk, (1, 2, 3), kind))
        d = sk.dims
        want = (d.s + 2 * d.k + d.l, d.s + d.l)
    else:
        sys_ = make_system(build_rev_params(plan_reversible(2, 2, 1, 1, 2), (1, 2), kind))
        want = (2 + 1, 2)
    v = reversibility_check(sys_)
    assert v.reversible and v.type == want


def test_identity_is_not_reversing():
    sys_ = single_pair()
    v = reversibility_check(sys_, identity_involution(sys_))
    assert not v.reversible and v.residuals
