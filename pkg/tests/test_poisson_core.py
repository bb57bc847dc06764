from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

import oracles
from kronecker_tori import linalg as la
from kronecker_tori.poisson_core import (
    Dims,
    NotSkew,
    RankDeficientZ,
    SingularJ,
    StructureSpec,
    TorusKind,
    assemble_structure,
    classify_torus,
    default_structure,
    expected_kind,
    is_exact_form,
    spec_from_json,
    spec_to_json,
    torus_tangent_complement,
)
from strategies import full_rank_Z, small_fraction


def test_canonical_assembly_smallest_case():
    st_ = assemble_structure(StructureSpec(Dims(1, 0, 1), [[1]], [[0]]))
    want = [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]]
    assert st_.J == la.matrix(want)


def test_det_of_diagonal_Z():
    st_ = assemble_structure(StructureSpec(Dims(2, 0, 0), [[2, 0], [0, 3]], [[0, 5], [-5, 0]]))
    assert la.det(st_.J) == 36


def test_degenerate_sharp_block_is_singular():
    L = la.zeros(3, 3)
    with pytest.raises(SingularJ, match="L_sharp"):
        assemble_structure(StructureSpec(Dims(1, 1, 0), [[0], [0], [1]], L))


def test_rank_deficient_Z_rejected():
    with pytest.raises(RankDeficientZ):
        assemble_structure(StructureSpec(Dims(2, 0, 0), [[1, 2], [2, 4]], la.zeros(2, 2)))


def test_non_skew_L_rejected():
    with pytest.raises(NotSkew):
        assemble_structure(StructureSpec(Dims(1, 0, 0), [[1]], [[1]]))


def test_W_inverts_J_and_pq_block_is_canonical():
    st_ = assemble_structure(default_structure(Dims(2, 1, 2)))
    assert la.matmul(st_.J, st_.W) == la.identity(2 * 5)
    assert st_.block("J", "q", "p") == la.identity(2)


@given(st.integers(1, 3), st.data())
def test_det_is_square_of_det_Z_when_k_zero(s, data):
    Z = data.draw(full_rank_Z(s, s))
    entries = [data.draw(small_fraction) for _ in range(s * (s - 1) // 2)]
    L = [[F(0)] * s for _ in range(s)]
    it = iter(entries)
    for i in range(s):
        for j in range(i + 1, s):
            L[i][j] = next(it)
            L[j][i] = -L[i][j]
    st_ = assemble_structure(StructureSpec(Dims(s, 0, 0), Z, L))
    assert la.det(st_.J) == oracles.det(Z) ** 2
    assert oracles.det(st_.J) == la.det(st_.J)


@given(st.integers(1, 2), st.integers(1, 2), st.data())
def test_special_form_det(s, k, data):
    """Z = (0; Z_sharp), L with L_sharp in the top-left corner."""
    Zs = data.draw(full_rank_Z(s, s))
    n = s + 2 * k
    Z = [[F(0)] * s for _ in range(2 * k)] + [list(r) for r in Zs]
    L = [[F(0)] * n for _ in range(n)]
    for i in range(2 * k):
        for j in range(i + 1, n):
            L[i][j] = data.draw(small_fraction)
            L[j][i] = -L[i][j]
    Lsharp = [row[: 2 * k] for row in L[: 2 * k]]
    want = oracles.det(Lsharp) * oracles.det(Zs) ** 2
    spec = StructureSpec(Dims(s, k, 0), Z, L)
    if want == 0:
        with pytest.raises(SingularJ):
            assemble_structure(spec)
    else:
        assert la.det(assemble_structure(spec).J) == want


SWEEP = [Dims(s, k, l) for s in range(1, 4) for k in range(3) for l in range(3)]


@pytest.mark.parametrize("dims", SWEEP, ids=str)
def test_classification_sweep(dims):
    st_ = assemble_structure(default_structure(dims))
    cls = classify_torus(st_)
    assert cls.kind is expected_kind(dims.k, dims.l)
    assert cls.intersection_dim == dims.s
    assert len(torus_tangent_complement(st_)) == dims.s + 2 * dims.l
    assert is_exact_form(st_) == (dims.k == 0)


def test_Tperp_examples():
    st_ = assemble_structure(StructureSpec(Dims(1, 0, 0), [[1]], [[0]]))
    Tp = torus_tangent_complement(st_)
    assert len(Tp) == 1 and la.in_span((F(0), F(1)), Tp)
    st_ = assemble_structure(default_structure(Dims(1, 1, 1), [[1], [0], [0]]))
    assert len(torus_tangent_complement(st_)) == 3


@pytest.mark.parametrize(
    "dims,kind,inter",
    [
        (Dims(1, 0, 0), TorusKind.LAGRANGIAN, 1),
        (Dims(2, 0, 1), TorusKind.STRICTLY_ISOTROPIC, 2),
        (Dims(1, 1, 1), TorusKind.ATROPIC, 1),
    ],
)
def test_classification_examples(dims, kind, inter):
    cls = classify_torus(assemble_structure(default_structure(dims)))
    assert (cls.kind, cls.intersection_dim) == (kind, inter)


@given(st.integers(1, 3), st.integers(0, 2), st.data())
def test_custom_Z_classification_matches_predicate(s, k, data):
    Z = data.draw(full_rank_Z(s + 2 * k, s))
    st_ = assemble_structure(default_structure(Dims(s, k, 1), Z))
    assert classify_torus(st_).kind is expected_kind(k, 1)
    assert oracles.rank([list(r) for r in st_.J]) == 2 * (s + k + 1)


def test_json_round_trip():
    spec = default_structure(Dims(2, 1, 1), [[F(1, 2), 0], [0, 0], [0, 1], [3, 0]])
    assert spec_from_json(spec_to_json(spec)) == spec


def test_json_rejects_floats():
    with pytest.raises(ValueError, match="floats"):
        spec_from_json('{"dims": {"s": 1, "k": 0, "l": 0}, "Z": [[0.5]], "L": [["0"]]}')


def test_torus_kind_parse_aliases():
    assert TorusKind.parse("atropic") is TorusKind.ATROPIC
    assert TorusKind.parse("isotropic") is TorusKind.STRICTLY_ISOTROPIC
    assert TorusKind.parse("Strictly-Coisotropic") is TorusKind.STRICTLY_COISOTROPIC
    with pytest.raises(ValueError):
        TorusKind.parse("symplectic")
