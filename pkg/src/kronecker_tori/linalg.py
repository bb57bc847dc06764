"""Small exact linear algebra over the rationals.

Matrices are tuples of tuples of ``Fraction``.  Everything here is
Gauss-Jordan elimination; sizes are tiny (at most a few dozen rows), so
clarity beats cleverness.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Matrix = tuple[tuple[Fraction, ...], ...]
Vector = tuple[Fraction, ...]


def to_fraction(x) -> Fraction:
    """Coerce an int, Fraction, float or ``"p/q"`` string to a Fraction.

    Floats are converted exactly (every finite double is a dyadic rational).
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not matrix entries")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError(f"non-finite entry {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    # numpy scalars and the like
    if hasattr(x, "item"):
        return to_fraction(x.item())
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def fraction_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def matrix(rows: Iterable[Iterable]) -> Matrix:
    out = tuple(tuple(to_fraction(v) for v in row) for row in rows)
    if out and len({len(r) for r in out}) != 1:
        raise ValueError("ragged matrix")
    return out


def shape(a: Matrix, ncols: int | None = None) -> tuple[int, int]:
    if not a:
        return (0, ncols or 0)
    return (len(a), len(a[0]))


def zeros(m: int, n: int) -> Matrix:
    z = Fraction(0)
    return tuple(tuple(z for _ in range(n)) for _ in range(m))


def identity(n: int) -> Matrix:
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


def transpose(a: Matrix, ncols: int = 0) -> Matrix:
    if not a:
        return tuple(() for _ in range(ncols))
    return tuple(zip(*a))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    bt = transpose(b)
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt) for row in a)


def matvec(a: Matrix, v: Sequence[Fraction]) -> Vector:
    return tuple(sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in a)


def neg(a: Matrix) -> Matrix:
    return tuple(tuple(-x for x in row) for row in a)


def is_skew(a: Matrix) -> bool:
    n = len(a)
    return all(a[i][j] == -a[j][i] for i in range(n) for j in range(n))


def block(rows: Sequence[Sequence[Matrix]], row_sizes: Sequence[int], col_sizes: Sequence[int]) -> Matrix:
    """Assemble a block matrix; empty blocks are allowed via the explicit sizes."""
    out = []
    for bi, brow in enumerate(rows):
        for r in range(row_sizes[bi]):
            line: list[Fraction] = []
            for bj, blk in enumerate(brow):
                if col_sizes[bj] == 0:
                    continue
                line.extend(blk[r])
            out.append(tuple(line))
    return tuple(out)


def rref(a: Matrix) -> tuple[Matrix, tuple[int, ...]]:
    """Reduced row echelon form and pivot columns."""
    m = [list(row) for row in a]
    nrows = len(m)
    ncols = len(m[0]) if m else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(nrows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return tuple(tuple(row) for row in m), tuple(pivots)


def rank(a: Matrix) -> int:
    if not a or not a[0]:
        return 0
    return len(rref(a)[1])


def det(a: Matrix) -> Fraction:
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("determinant of a non-square matrix")
    m = [list(row) for row in a]
    d = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            d = -d
        d *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] / m[c][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return d


def inverse(a: Matrix) -> Matrix:
    n = len(a)
    aug = tuple(tuple(row) + idrow for row, idrow in zip(a, identity(n)))
    r, pivots = rref(aug)
    if pivots[:n] != tuple(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return tuple(row[n:] for row in r)


def nullspace(a: Matrix, ncols: int | None = None) -> tuple[Vector, ...]:
    """Basis of {x : a x = 0}, one vector per free column of the RREF."""
    n = ncols if ncols is not None else (len(a[0]) if a else 0)
    if not a:
        return tuple(tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n))
    r, pivots = rref(a)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for row, p in zip(r, pivots):
            v[p] = -row[f]
        basis.append(tuple(v))
    return tuple(basis)


def span_dim(vectors: Sequence[Sequence[Fraction]]) -> int:
    vs = [tuple(v) for v in vectors]
    return rank(tuple(vs)) if vs else 0


def in_span(v: Sequence[Fraction], basis: Sequence[Sequence[Fraction]]) -> bool:
    return span_dim(list(basis) + [v]) == span_dim(basis)


def solve(a: Matrix, b: Sequence[Fraction]) -> Vector | None:
    """One exact solution of a x = b, or None when the system is inconsistent."""
    n = len(a[0]) if a else 0
    aug = tuple(tuple(row) + (to_fraction(bi),) for row, bi in zip(a, b))
    r, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for row, p in zip(r, pivots):
        x[p] = row[n]
    return tuple(x)
