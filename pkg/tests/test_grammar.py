from fractions import Fraction as F

import pytest
from hypothesis import given

from kronecker_tori.exact_poly import PolyExpr, VarKind
from kronecker_tori.grammar import GrammarError, format_expr, parse_expr, parse_program
from strategies import CTX, real_poly

U = {"u1": VarKind.LINE, "u2": VarKind.LINE}


def test_linear_h():
    h = parse_expr("1*u1 + 3/2*u2", U)
    assert h == PolyExpr.line("u1") + PolyExpr.line("u2") * F(3, 2)


def test_program_with_bindings():
    ctx = {"u1": VarKind.LINE, "p1": VarKind.LINE, "q1": VarKind.LINE}
    prog = parse_program(
        "h = 2*u1\nH = h + l*p1*(z1*u1^2) + x1*p1*q1^2 + e1*p1^3/3",
        ctx,
        {"l": 1, "z1": 1, "x1": 2, "e1": 3},
    )
    u, p, q = (PolyExpr.line(n) for n in ("u1", "p1", "q1"))
    assert prog["H"] == u * 2 + p * u**2 + p * q**2 * 2 + p**3
    assert prog["h"] == u * 2


def test_decimals_are_exact():
    assert parse_expr("0.1*u1", U) == PolyExpr.line("u1") * F(1, 10)


def test_trig_with_phase():
    ctx = {"a": VarKind.ANGLE}
    assert parse_expr("sin(a + pi/2)", ctx) == PolyExpr.cos("a")
    assert parse_expr("cos(2*a)", ctx) == PolyExpr.cos({"a": 2})


def test_power_binds_tighter_than_minus():
    assert parse_expr("-u1^2", U) == -(PolyExpr.line("u1") ** 2)


@pytest.mark.parametrize(
    "text,message",
    [
        ("u1 +", "unexpected"),
        ("u1 / u2", "division by a non-constant"),
        ("u1 / 0", "division by zero"),
        ("w", "unknown name"),
        ("u1 $ 2", "unexpected character"),
        ("u1^-1", "non-negative integer"),
    ],
)
def test_error_messages(text, message):
    with pytest.raises(GrammarError, match=message):
        parse_expr(text, U)


@pytest.mark.parametrize(
    "text,message",
    [
        ("a + 1", "cannot mix angle arguments"),
        ("a", "outside sin/cos"),
        ("sin(a/2)", "integers"),
        ("sin(a + pi/3)", "multiple of pi/2"),
    ],
)
def test_angle_errors(text, message):
    with pytest.raises(GrammarError, match=message):
        parse_expr(text, {"a": VarKind.ANGLE})


def test_error_points_at_column():
    with pytest.raises(GrammarError, match="column 4"):
        parse_expr("u1 $", U)


@given(real_poly())
def test_round_trip(f):
    text = format_expr(f)
    g = parse_expr(text, CTX)
    assert g == f
    assert format_expr(g) == text
