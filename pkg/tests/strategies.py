from fractions import Fraction

from hypothesis import strategies as st

from kronecker_tori.exact_poly import PolyExpr, VarKind
from kronecker_tori.poisson_core import Dims

small_fraction = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 4))
nonneg_fraction = st.builds(Fraction, st.integers(0, 6), st.integers(1, 3))

LINE = ("x", "y")
ANGLE = ("a", "b")
CTX = {"x": VarKind.LINE, "y": VarKind.LINE, "a": VarKind.ANGLE, "b": VarKind.ANGLE}


@st.composite
def real_poly(draw, line=LINE, angle=ANGLE, max_terms=3, max_deg=2, max_index=2):
    """Sum of c * (line monomial) * cos/sin(integer combination of angles)."""
    f = PolyExpr.zero(CTX)
    for _ in range(draw(st.integers(0, max_terms))):
        c = draw(small_fraction)
        term = PolyExpr.const(c)
        for v in line:
            e = draw(st.integers(0, max_deg))
            if e:
                term = term * PolyExpr.line(v) ** e
        idx = {v: draw(st.integers(-max_index, max_index)) for v in angle}
        idx = {k: e for k, e in idx.items() if e}
        if idx:
            trig = PolyExpr.cos if draw(st.booleans()) else PolyExpr.sin
            term = term * trig(idx)
        f = f + term
    return f.with_variables(CTX)


dims_strategy = st.builds(Dims, st.integers(1, 3), st.integers(0, 2), st.integers(0, 2))


nonzero_int = st.integers(1, 3).flatmap(lambda a: st.sampled_from([a, -a]))


@st.composite
def full_rank_Z(draw, n, s):
    """Integer (n x s) matrix of rank s: lower-unitriangular times upper
    triangular with nonzero diagonal on s rows, arbitrary extra rows, then a
    row permutation."""
    lower = [[1 if i == j else (draw(st.integers(-2, 2)) if j < i else 0) for j in range(s)] for i in range(s)]
    upper = [[draw(nonzero_int) if i == j else (draw(st.integers(-2, 2)) if j > i else 0) for j in range(s)] for i in range(s)]
    top = [[sum(lower[i][t] * upper[t][j] for t in range(s)) for j in range(s)] for i in range(s)]
    extra = [[draw(st.integers(-3, 3)) for _ in range(s)] for _ in range(n - s)]
    rows = draw(st.permutations(top + extra))
    return tuple(tuple(Fraction(x) for x in r) for r in rows)
