import math
from fractions import Fraction as F

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from kronecker_tori.exact_poly import (
    HALF_PI,
    PI,
    MissingAssignment,
    PiMultiple,
    PolyExpr,
    UnknownVariable,
    VariableKindClash,
    VarKind,
    ContextMismatch,
    compile_numeric,
    factor_out_cos,
    pairwise_brackets,
    poisson_bracket,
    weighted_sos_form,
)
from kronecker_tori.poisson_core import Dims, assemble_structure, default_structure
from strategies import CTX, real_poly, small_fraction

LINE = VarKind.LINE
ANGLE = VarKind.ANGLE
x, y = PolyExpr.line("x"), PolyExpr.line("y")


def point_strategy():
    return st.fixed_dictionaries({n: st.floats(-2, 2) for n in CTX})


# -- algebra ------------------------------------------------------------------


def test_add_example():
    u = PolyExpr.line("u")
    assert u**2 + u == PolyExpr({"u": LINE}, {(("u", 2),): 1, (("u", 1),): 1})


def test_sin_squared_is_product_to_sum():
    s = PolyExpr.sin("q")
    assert s * s == (1 - PolyExpr.cos({"q": 2})) / 2


def test_times_zero_has_empty_term_map():
    f = PolyExpr.sin("q") * x + 3
    assert (f * 0).terms == {}
    assert (f * PolyExpr.zero()).is_zero()


def test_kind_clash():
    with pytest.raises(VariableKindClash):
        PolyExpr.line("a") + PolyExpr.sin("a")


@given(real_poly(), real_poly(), real_poly())
def test_ring_axioms(f, g, h):
    assert (f + g) + h == f + (g + h)
    assert (f * g) * h == f * (g * h)
    assert f * g == g * f
    assert f * (g + h) == f * g + f * h
    assert f - f == PolyExpr.zero()


@given(real_poly(), real_poly())
def test_products_of_real_expressions_stay_real(f, g):
    assert f.is_real() and (f * g).is_real() and (f + g).is_real()


@given(real_poly(), point_strategy())
def test_float_evaluation_matches_sympy(f, pt):
    syms = {n: sp.Symbol(n, real=True) for n in CTX}
    expr = f.to_sympy(syms)
    want = complex(expr.subs({syms[n]: v for n, v in pt.items()}).evalf())
    got = f.evaluate(pt)
    assert abs(want.imag) < 1e-9
    assert got == pytest.approx(want.real, abs=1e-9)


# -- calculus -------------------------------------------------------------------


def test_derivative_examples():
    xi, eta = F(2), F(5)
    p, q = PolyExpr.line("p"), PolyExpr.line("q")
    f = p * q**2 * xi + p**3 * eta / 3
    assert f.derivative("p") == q**2 * xi + p**2 * eta
    s = PolyExpr.sin("q")
    assert (s * s).derivative("q") == PolyExpr.sin({"q": 2})
    assert PolyExpr.const(7, {"u": LINE}).derivative("u").is_zero()


def test_derivative_unknown_variable():
    with pytest.raises(UnknownVariable):
        x.derivative("z")


@given(real_poly(), st.sampled_from(list(CTX)), st.sampled_from(list(CTX)))
def test_partial_derivatives_commute(f, a, b):
    assert f.derivative(a).derivative(b) == f.derivative(b).derivative(a)


@given(real_poly(), real_poly(), st.sampled_from(list(CTX)))
def test_leibniz_rule(f, g, v):
    assert (f * g).derivative(v) == f.derivative(v) * g + f * g.derivative(v)


@given(real_poly(), st.sampled_from(list(CTX)))
def test_derivative_matches_sympy(f, v):
    syms = {n: sp.Symbol(n, real=True) for n in CTX}
    diff = sp.diff(f.to_sympy(syms), syms[v]) - f.derivative(v).to_sympy(syms)
    assert sp.simplify(sp.expand_trig(sp.expand(diff.rewrite(sp.exp)))) == 0


# -- evaluation -------------------------------------------------------------------


def test_evaluate_examples():
    p, q = PolyExpr.line("p"), PolyExpr.line("q")
    assert (p * q**2).evaluate({"p": 1, "q": 1}) == 1
    assert PolyExpr.sin("u").evaluate({"u": HALF_PI}) == 1
    u = PolyExpr.line("u")
    assert (u**2 + q**2).evaluate({"u": 1, "q": 2}) == 5


def test_exact_evaluation_is_a_fraction():
    f = PolyExpr.cos("a") * x * F(1, 3) + PolyExpr.sin({"a": 3})
    v = f.evaluate({"a": PI, "x": F(3, 2)})
    assert isinstance(v, F) and v == F(-1, 2)


def test_evaluate_missing():
    with pytest.raises(MissingAssignment):
        (x * y).evaluate({"x": 1})


def test_reflect_negates_odd_parts():
    f = PolyExpr.sin("a") * x + PolyExpr.cos("a") * y**2
    g = f.reflect({"a": -1, "x": -1})
    assert g == f
    assert PolyExpr.sin("a").reflect({"a": -1}) == -PolyExpr.sin("a")


def test_substitute_pi_multiples():
    f = PolyExpr.sin("a") * x
    assert f.substitute({"a": PiMultiple(F(1, 2))}) == x.with_variables(f.variables)


# -- brackets ---------------------------------------------------------------------

STRUCT = assemble_structure(default_structure(Dims(1, 1, 1)))
COORD_CTX = {"u1": LINE, "phi1": ANGLE, "phi2": ANGLE, "phi3": ANGLE, "p1": LINE, "q1": LINE}


@st.composite
def coord_poly(draw):
    f = PolyExpr.zero(COORD_CTX)
    for _ in range(draw(st.integers(0, 3))):
        term = PolyExpr.const(draw(small_fraction))
        for v in ("u1", "p1", "q1"):
            e = draw(st.integers(0, 2))
            if e:
                term = term * PolyExpr.line(v) ** e
        idx = {v: draw(st.integers(-1, 1)) for v in ("phi1", "phi2", "phi3")}
        idx = {k: e for k, e in idx.items() if e}
        if idx:
            term = term * (PolyExpr.cos(idx) if draw(st.booleans()) else PolyExpr.sin(idx))
        f = f + term
    return f.with_variables(COORD_CTX)


def test_canonical_pair_bracket():
    q, p = PolyExpr.line("q1"), PolyExpr.line("p1")
    assert poisson_bracket(q, p, STRUCT) == PolyExpr.const(1)


def test_bracket_context_mismatch():
    with pytest.raises(ContextMismatch):
        poisson_bracket(PolyExpr.line("z"), PolyExpr.line("q1"), STRUCT)


@given(coord_poly())
def test_self_bracket_vanishes(f):
    assert poisson_bracket(f, f, STRUCT).is_zero()


@given(coord_poly(), coord_poly())
def test_antisymmetry(f, g):
    assert poisson_bracket(f, g, STRUCT) == -poisson_bracket(g, f, STRUCT)


@given(coord_poly(), coord_poly(), coord_poly())
def test_jacobi_identity(f, g, h):
    b = lambda a, c: poisson_bracket(a, c, STRUCT)  # noqa: E731
    assert (b(f, b(g, h)) + b(g, b(h, f)) + b(h, b(f, g))).is_zero()


@given(coord_poly(), coord_poly(), coord_poly())
def test_bracket_leibniz(f, g, h):
    b = lambda a, c: poisson_bracket(a, c, STRUCT)  # noqa: E731
    assert b(f, g * h) == b(f, g) * h + g * b(f, h)


def test_pairwise_matrix_is_skew():
    fs = [PolyExpr.line("u1"), PolyExpr.line("p1"), PolyExpr.line("q1")]
    P = pairwise_brackets(fs, STRUCT)
    assert P[2][1] == PolyExpr.const(1) and P[1][2] == PolyExpr.const(-1)
    assert P[0][1].is_zero() and P[0][2].is_zero()


# -- positivity -------------------------------------------------------------------


def test_sos_polynomial_drift():
    q, p, u = PolyExpr.line("q"), PolyExpr.line("p"), PolyExpr.line("u")
    f = q**2 * 2 + p**2 * 3 + u**2 * F(1, 2)
    form = weighted_sos_form(f)
    assert form is not None
    rebuilt = sum((m * m * c for c, m in form), PolyExpr.zero())
    assert rebuilt == f.with_variables(rebuilt.variables)


def test_sos_trig_drift():
    s = PolyExpr.sin("q")
    f = s * s * 3 + 2
    form = weighted_sos_form(f)
    assert form is not None and all(c >= 0 for c, _ in form)
    assert sum((m * m * c for c, m in form), PolyExpr.zero()) == f


def test_sos_rejects_odd_and_negative():
    assert weighted_sos_form(PolyExpr.line("u") ** 3) is None
    assert weighted_sos_form(PolyExpr.line("u") ** 2 * -1) is None


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 2), st.integers(0, 2), st.booleans()), max_size=4))
def test_sos_finds_generated_squares(parts):
    f = PolyExpr.zero(CTX)
    for c, ex, ey, with_sin in parts:
        m = PolyExpr.const(1) * x**ex * y**ey
        if with_sin:
            m = m * PolyExpr.sin("a")
        f = f + m * m * c
    form = weighted_sos_form(f.with_variables(CTX))
    assert form is not None
    assert all(c >= 0 for c, _ in form)


@given(real_poly())
def test_factor_out_cos_round_trip(f):
    g = f * PolyExpr.cos("a")
    A = factor_out_cos(g, "a")
    assert A is not None and A * PolyExpr.cos("a") == g


def test_factor_out_cos_refuses_non_multiples():
    assert factor_out_cos(PolyExpr.sin("a").with_variables(CTX), "a") is None


def test_compile_numeric_vectorised():
    f = PolyExpr.sin("a") * x + y**2
    fn = compile_numeric([f, x], ["x", "y", "a"])
    import numpy as np

    pts = np.array([[1.0, 2.0], [0.5, -1.0], [math.pi / 2, 0.0]])
    out = fn(pts)
    assert out.shape == (2, 2)
    assert out[0] == pytest.approx([1.25, 1.0])
