"""Exact mixed polynomial / finite Fourier series expressions.

A ``PolyExpr`` is a finite sum of terms

    c * prod_x x^{e_x} * exp(i * sum_theta m_theta * theta)

over *line* variables ``x`` (non-negative exponents) and *angle* variables
``theta`` (integer Fourier indices), with Gaussian-rational coefficients
``c``.  Real-valued expressions pair every Fourier index with its negative
and the conjugate coefficient.  The class is closed under sums, products and
partial derivatives, which is all the Hamiltonian machinery needs.

Terms are keyed by sorted ``(name, exponent_or_index)`` tuples with zero
entries dropped, so equal functions have identical term maps.
"""

from __future__ import annotations

import enum
import itertools
import math
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .linalg import fraction_str, to_fraction


class PolyError(ValueError):
    pass


class VariableKindClash(PolyError):
    pass


class UnknownVariable(PolyError):
    pass


class MissingAssignment(PolyError):
    pass


class ContextMismatch(PolyError):
    pass


class VarKind(str, enum.Enum):
    LINE = "line"
    ANGLE = "angle"


class GaussianRational:
    """Exact a + b i with rational a, b."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else to_fraction(re)
        self.im = im if isinstance(im, Fraction) else to_fraction(im)

    @staticmethod
    def of(x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            return GaussianRational(x.real, x.imag)
        return GaussianRational(to_fraction(x), 0)

    def __add__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return GaussianRational.of(o) - self

    def __mul__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = GaussianRational.of(o)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __eq__(self, o):
        if isinstance(o, (int, Fraction, float, complex, GaussianRational)):
            o = GaussianRational.of(o)
            return self.re == o.re and self.im == o.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def is_real(self) -> bool:
        return self.im == 0

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return fraction_str(self.re)
        return f"({fraction_str(self.re)}{'+' if self.im >= 0 else '-'}{fraction_str(abs(self.im))}i)"


GQ = GaussianRational
_ZERO = GQ(0)
_ONE = GQ(1)
_I = GQ(0, 1)

Monomial = tuple[tuple[str, int], ...]


class PiMultiple:
    """The exact angle ``r * pi`` for rational r, for symbolic evaluation."""

    __slots__ = ("r",)

    def __init__(self, r):
        self.r = to_fraction(r)

    def __float__(self):
        return float(self.r) * math.pi

    def __eq__(self, o):
        return isinstance(o, PiMultiple) and o.r == self.r

    def __hash__(self):
        return hash(("pi", self.r))

    def __repr__(self):
        return f"PiMultiple({fraction_str(self.r)})"


HALF_PI = PiMultiple(Fraction(1, 2))
PI = PiMultiple(1)


def _exp_i_pi(r: Fraction) -> GaussianRational | None:
    """exp(i r pi) when r is a multiple of 1/2, else None."""
    r2 = r * 2
    if r2.denominator != 1:
        return None
    return (_ONE, _I, GQ(-1), GQ(0, -1))[int(r2) % 4]


class PolyExpr:
    __slots__ = ("variables", "terms")

    def __init__(self, variables: Mapping[str, VarKind] | None = None, terms: Mapping[Monomial, object] | None = None):
        self.variables: dict[str, VarKind] = {k: VarKind(v) for k, v in (variables or {}).items()}
        clean: dict[Monomial, GaussianRational] = {}
        for mono, c in (terms or {}).items():
            c = GQ.of(c)
            if not c:
                continue
            key = tuple(sorted((n, int(e)) for n, e in mono if e != 0))
            for name, e in key:
                kind = self.variables.get(name)
                if kind is None:
                    raise UnknownVariable(f"term uses {name!r}, not in the variable context")
                if kind is VarKind.LINE and e < 0:
                    raise PolyError(f"negative exponent on line variable {name!r}")
            if key in clean:
                s = clean[key] + c
                if s:
                    clean[key] = s
                else:
                    del clean[key]
            else:
                clean[key] = c
        self.terms: dict[Monomial, GaussianRational] = clean

    # -- constructors ----------------------------------------------------

    @classmethod
    def const(cls, c, variables: Mapping[str, VarKind] | None = None) -> "PolyExpr":
        return cls(variables, {(): c})

    @classmethod
    def zero(cls, variables=None) -> "PolyExpr":
        return cls(variables, {})

    @classmethod
    def line(cls, name: str) -> "PolyExpr":
        return cls({name: VarKind.LINE}, {((name, 1),): 1})

    @classmethod
    def fourier(cls, indices: Mapping[str, int], coeff=1, variables=None) -> "PolyExpr":
        """coeff * exp(i * sum m_theta theta); not real-valued on its own."""
        ctx = dict(variables or {})
        for n in indices:
            if ctx.setdefault(n, VarKind.ANGLE) is not VarKind.ANGLE:
                raise VariableKindClash(f"{n!r} is a line variable")
        return cls(ctx, {tuple(indices.items()): coeff})

    @classmethod
    def cos(cls, indices: Mapping[str, int] | str, phase: Fraction = Fraction(0)) -> "PolyExpr":
        """cos(sum m theta + phase * pi)."""
        idx = {indices: 1} if isinstance(indices, str) else dict(indices)
        e = _exp_i_pi(to_fraction(phase))
        if e is None:
            raise PolyError("phase must be a multiple of pi/2")
        neg = {k: -v for k, v in idx.items()}
        return cls.fourier(idx, e * GQ(Fraction(1, 2))) + cls.fourier(neg, e.conjugate() * GQ(Fraction(1, 2)))

    @classmethod
    def sin(cls, indices: Mapping[str, int] | str, phase: Fraction = Fraction(0)) -> "PolyExpr":
        """sin(sum m theta + phase * pi)."""
        return cls.cos(indices, to_fraction(phase) - Fraction(1, 2))

    # -- basic protocol ---------------------------------------------------

    def _merge_ctx(self, other: "PolyExpr") -> dict[str, VarKind]:
        ctx = dict(self.variables)
        for n, k in other.variables.items():
            if ctx.setdefault(n, k) is not k:
                raise VariableKindClash(f"{n!r} is tagged both line and angle")
        return ctx

    def _coerce(self, other) -> "PolyExpr":
        if isinstance(other, PolyExpr):
            return other
        if isinstance(other, (int, Fraction, GaussianRational, float, str)) and not isinstance(other, bool):
            return PolyExpr.const(other)
        return NotImplemented

    def with_variables(self, variables: Mapping[str, VarKind]) -> "PolyExpr":
        ctx = dict(variables)
        for n, k in self.variables.items():
            if ctx.setdefault(n, k) is not k:
                raise VariableKindClash(f"{n!r} is tagged both line and angle")
        return PolyExpr(ctx, self.terms)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms[m] + c if m in terms else c
        return PolyExpr(self._merge_ctx(other), terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr(self.variables, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        ctx = self._merge_ctx(other)
        acc: dict[Monomial, GaussianRational] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                key = _mono_mul(m1, m2)
                c = c1 * c2
                acc[key] = acc[key] + c if key in acc else c
        return PolyExpr(ctx, acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PolyExpr):
            if not other.is_constant():
                raise PolyError("division by a non-constant expression")
            other = other.constant_value()
        inv = _ONE / GQ.of(other)
        return PolyExpr(self.variables, {m: c * inv for m, c in self.terms.items()})

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            raise PolyError("only non-negative integer powers are supported")
        out = PolyExpr.const(1, self.variables)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, PolyExpr):
            return self.terms == other.terms
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.terms == o.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        from .grammar import format_expr

        return f"PolyExpr({format_expr(self)!r})"

    def __str__(self):
        from .grammar import format_expr

        return format_expr(self)

    # -- queries ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant_value(self) -> GaussianRational:
        if not self.is_constant():
            raise PolyError("expression is not constant")
        return self.terms.get((), _ZERO)

    def free_symbols(self) -> set[str]:
        return {n for m in self.terms for n, _ in m}

    def is_real(self) -> bool:
        for m, c in self.terms.items():
            conj = self._conj_key(m)
            if conj == m:
                if not c.is_real():
                    return False
            elif self.terms.get(conj) != c.conjugate():
                return False
        return True

    def _conj_key(self, m: Monomial) -> Monomial:
        return tuple((n, -e) if self.variables[n] is VarKind.ANGLE else (n, e) for n, e in m)

    def degree(self, name: str) -> int:
        return max((abs(dict(m).get(name, 0)) for m in self.terms), default=0)

    # -- calculus and transformations ------------------------------------

    def derivative(self, var: str) -> "PolyExpr":
        kind = self.variables.get(var)
        if kind is None:
            raise UnknownVariable(f"{var!r} is not in the variable context")
        out: dict[Monomial, GaussianRational] = {}
        for m, c in self.terms.items():
            d = dict(m)
            e = d.get(var, 0)
            if e == 0:
                continue
            if kind is VarKind.LINE:
                d[var] = e - 1
                out[tuple(d.items())] = c * e
            else:
                out[m] = c * GQ(0, e)
        return PolyExpr(self.variables, out)

    def gradient(self, names: Sequence[str]) -> list["PolyExpr"]:
        return [self.derivative(n) if n in self.variables else PolyExpr.zero(self.variables) for n in names]

    def reflect(self, signs: Mapping[str, int]) -> "PolyExpr":
        """Compose with x -> sign * x coordinatewise (sign in {+1, -1})."""
        out: dict[Monomial, GaussianRational] = {}
        for m, c in self.terms.items():
            key = []
            for n, e in m:
                sg = signs.get(n, 1)
                if sg == -1:
                    if self.variables[n] is VarKind.LINE:
                        c = -c if e % 2 else c
                        key.append((n, e))
                    else:
                        key.append((n, -e))
                else:
                    key.append((n, e))
            k = tuple(key)
            out[k] = out[k] + c if k in out else c
        return PolyExpr(self.variables, out)

    def substitute(self, values: Mapping[str, object]) -> "PolyExpr":
        """Exact partial substitution of rationals (line) or pi-multiples (angle)."""
        out: dict[Monomial, GaussianRational] = {}
        for m, c in self.terms.items():
            key = []
            for n, e in m:
                if n not in values:
                    key.append((n, e))
                    continue
                c = c * _exact_factor(self.variables[n], values[n], e)
            k = tuple(key)
            out[k] = out[k] + c if k in out else c
        return PolyExpr(self.variables, out)

    def evaluate(self, point: Mapping[str, object]):
        """Value at ``point``.

        Exact (Fraction, or GaussianRational if complex) when every line
        value is rational and every angle value is a ``PiMultiple`` landing
        on a multiple of pi/2; otherwise a Python float (complex part
        dropped for real-valued expressions) computed in double precision.
        """
        missing = self.free_symbols() - set(point)
        if missing:
            raise MissingAssignment(f"no value for {sorted(missing)}")
        try:
            total = self.substitute({n: point[n] for n in self.free_symbols()})
            v = total.constant_value()
            return v.re if v.is_real() else v
        except _NotExact:
            pass
        acc = 0j
        for m, c in self.terms.items():
            val = complex(c)
            phase = 0.0
            for n, e in m:
                x = float(point[n])
                if self.variables[n] is VarKind.LINE:
                    val *= x**e
                else:
                    phase += e * x
            acc += val * complex(math.cos(phase), math.sin(phase))
        return acc.real if self.is_real() else acc

    # -- numerics ---------------------------------------------------------

    def to_sympy(self, symbols: Mapping[str, object] | None = None):
        import sympy as sp

        syms = dict(symbols or {})
        for n in self.variables:
            syms.setdefault(n, sp.Symbol(n, real=True))

        def rat(x: Fraction):
            return sp.Rational(x.numerator, x.denominator)

        real = self.is_real()
        expr = sp.Integer(0)
        for m, c in self.terms.items():
            line = sp.Integer(1)
            arg = sp.Integer(0)
            for n, e in m:
                if self.variables[n] is VarKind.LINE:
                    line *= syms[n] ** e
                else:
                    arg += e * syms[n]
            if arg == 0:
                expr += (rat(c.re) + sp.I * rat(c.im)) * line
            elif not real:
                expr += (rat(c.re) + sp.I * rat(c.im)) * line * sp.exp(sp.I * arg)
            elif _leading_positive(m, self.variables):
                # c e^{ia} + conj(c) e^{-ia} = 2 Re c cos a - 2 Im c sin a
                expr += line * (2 * rat(c.re) * sp.cos(arg) - 2 * rat(c.im) * sp.sin(arg))
        return expr


class _NotExact(Exception):
    pass


def _leading_positive(m: Monomial, variables: Mapping[str, VarKind]) -> bool:
    """True when the first nonzero angle index of m is positive."""
    for n, e in m:
        if variables[n] is VarKind.ANGLE:
            return e > 0
    return False


def _exact_factor(kind: VarKind, value, e: int) -> GaussianRational:
    if kind is VarKind.LINE:
        if isinstance(value, (PiMultiple, float)):
            raise _NotExact
        return GQ(to_fraction(value) ** e)
    if isinstance(value, PiMultiple):
        f = _exp_i_pi(value.r * e)
        if f is None:
            raise _NotExact
        return f
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool) and value == 0:
        return _ONE
    raise _NotExact


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for n, e in b:
        d[n] = d.get(n, 0) + e
    return tuple(sorted((n, e) for n, e in d.items() if e != 0))


# -- context helpers -------------------------------------------------------


def variable(name: str, kind: VarKind, ctx: Mapping[str, VarKind] | None = None) -> PolyExpr:
    if kind is VarKind.ANGLE:
        raise PolyError("an angle variable is not a Fourier polynomial; use sin/cos")
    return PolyExpr.line(name).with_variables(ctx or {})


def combine(a: PolyExpr, b: PolyExpr, op: str) -> PolyExpr:
    if op == "add":
        return a + b
    if op == "multiply":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def derivative(f: PolyExpr, var: str) -> PolyExpr:
    return f.derivative(var)


def evaluate(f: PolyExpr, point: Mapping[str, object]):
    return f.evaluate(point)


def poisson_bracket(f: PolyExpr, g: PolyExpr, structure) -> PolyExpr:
    """(grad f)^T J (grad g) over the structure's coordinate list."""
    names = structure.dims.coordinate_names()
    allowed = set(names)
    for h in (f, g):
        extra = set(h.variables) - allowed
        if extra:
            raise ContextMismatch(f"variables {sorted(extra)} are not coordinates of this structure")
    gf = f.gradient(names)
    gg = g.gradient(names)
    J = structure.J
    out = PolyExpr.zero(f._merge_ctx(g))
    for a, da in enumerate(gf):
        if not da:
            continue
        row = J[a]
        inner = None
        for b, db in enumerate(gg):
            if row[b] == 0 or not db:
                continue
            t = db * row[b]
            inner = t if inner is None else inner + t
        if inner is not None:
            out = out + da * inner
    return out


# -- structural positivity ------------------------------------------------


def weighted_sos_form(f: PolyExpr) -> list[tuple[Fraction, PolyExpr]] | None:
    """Write f as sum c_r * m_r^2 with c_r >= 0 and m_r a monomial made of
    line variables and single-angle sines; None if f is not literally of
    that shape.  A pattern check, not an SOS solver.
    """
    if not f.is_real():
        return None
    # group terms by their line part
    groups: dict[Monomial, dict[Monomial, GaussianRational]] = {}
    for m, c in f.terms.items():
        line = tuple((n, e) for n, e in m if f.variables[n] is VarKind.LINE)
        ang = tuple((n, e) for n, e in m if f.variables[n] is VarKind.ANGLE)
        if any(e % 2 for _, e in line):
            return None
        groups.setdefault(line, {})[ang] = c
    result: list[tuple[Fraction, PolyExpr]] = []
    for line, fourier in sorted(groups.items()):
        rest = dict(fourier)
        if any(abs(e) not in (2,) for key in rest for _, e in key):
            return None
        subsets = sorted({tuple(n for n, _ in key) for key in rest}, key=lambda s: (-len(s), s))
        for S in subsets:
            top = tuple((n, 2) for n in S)
            c = rest.get(top)
            if c is None:
                continue
            weight = c / GQ(Fraction(-1, 4) ** len(S))
            if not weight.is_real() or weight.re < 0:
                return None
            basis = _sin_sq_product(S)
            for k, v in basis.items():
                nv = rest.get(k, _ZERO) - weight * v
                if nv:
                    rest[k] = nv
                else:
                    rest.pop(k, None)
            mono_ctx = {n: f.variables[n] for n, _ in line} | {n: VarKind.ANGLE for n in S}
            m = PolyExpr(mono_ctx, {tuple((n, e // 2) for n, e in line): 1})
            for n in S:
                m = m * PolyExpr.sin(n)
            result.append((weight.re, m.with_variables(f.variables)))
        if rest:
            return None
    return result


def _sin_sq_product(S: Sequence[str]) -> dict[Monomial, GaussianRational]:
    """Fourier terms of prod_{theta in S} sin^2 theta."""
    # sin^2 = 1/2 - e^{2i}/4 - e^{-2i}/4
    factors = [((0, Fraction(1, 2)), (2, Fraction(-1, 4)), (-2, Fraction(-1, 4))) for _ in S]
    out: dict[Monomial, GaussianRational] = {}
    for combo in itertools.product(*factors):
        key = tuple((n, e) for n, (e, _) in zip(S, combo) if e)
        c = Fraction(1)
        for _, w in combo:
            c *= w
        out[key] = out.get(key, _ZERO) + GQ(c)
    return out


def factor_out_cos(f: PolyExpr, var: str) -> PolyExpr | None:
    """A with f == A * cos(var) exactly, or None if cos(var) does not divide f."""
    if f.variables.get(var) is not VarKind.ANGLE:
        raise VariableKindClash(f"{var!r} is not an angle variable")
    by_index: dict[int, PolyExpr] = {}
    for m, c in f.terms.items():
        d = dict(m)
        e = d.pop(var, 0)
        part = PolyExpr(f.variables, {tuple(d.items()): c})
        by_index[e] = by_index[e] + part if e in by_index else part
    if not by_index:
        return PolyExpr.zero(f.variables)
    hi, lo = max(by_index), min(by_index)
    A: dict[int, PolyExpr] = {}
    zero = PolyExpr.zero(f.variables)
    # F_m = (A_{m-1} + A_{m+1}) / 2, solved downward from the top index
    for m in range(hi, lo, -1):
        A[m - 1] = by_index.get(m, zero) * 2 - A.get(m + 1, zero)
    out = zero
    for e, part in A.items():
        out = out + part * PolyExpr.fourier({var: e}, 1, f.variables)
    if out * PolyExpr.cos(var) != f:
        return None
    return out.with_variables(f.variables)


# -- numeric compilation ---------------------------------------------------


def compile_numeric(exprs: Sequence[PolyExpr], names: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised float evaluator: f(x) with x of shape (len(names), ...)
    returns an array of shape (len(exprs), ...)."""
    import sympy as sp

    syms = [sp.Symbol(n, real=True) for n in names]
    table = dict(zip(names, syms))
    sym_exprs = [e.to_sympy(table) for e in exprs]
    fn = sp.lambdify(syms, sym_exprs, modules="numpy", cse=True)
    count = len(exprs)

    def f(x: np.ndarray) -> np.ndarray:
        vals = fn(*x)
        out = np.empty((count,) + np.shape(x)[1:])
        for i, v in enumerate(vals):
            out[i] = v
        return out

    return f


def pairwise_brackets(funcs: Sequence[PolyExpr], structure) -> list[list[PolyExpr]]:
    n = len(funcs)
    P = [[PolyExpr.zero() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            b = poisson_bracket(funcs[i], funcs[j], structure)
            P[i][j] = b
            P[j][i] = -b
    return P


def context(names: Iterable[str], kind: VarKind) -> dict[str, VarKind]:
    return {n: kind for n in names}
