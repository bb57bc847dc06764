"""Plain-text expression grammar for ``PolyExpr``.

    program    := statement ((';' | newline) statement)*
    statement  := [IDENT '='] expr
    expr       := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := ('+' | '-') unary | power
    power      := atom ['^' INT]
    atom       := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
    FUNC       := sin | cos | expi

``^`` binds tighter than unary minus (``-x^2`` is ``-(x^2)``); ``*`` and ``/``
are left-associative; division is only by constants.  Numbers are integers
or decimals and are read exactly (``1.5`` is 3/2).  ``pi`` and ``I`` are
reserved.  Angle variables may only appear inside ``sin``/``cos``/``expi``,
whose argument must be an integer combination of angle variables plus an
optional multiple of ``pi/2``.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Mapping

from .exact_poly import GQ, GaussianRational, PolyError, PolyExpr, VarKind
from .linalg import fraction_str, to_fraction


class GrammarError(PolyError):
    def __init__(self, message: str, text: str = "", pos: int | None = None):
        where = ""
        if pos is not None and text:
            where = f" at column {pos + 1}: {text[:pos]}<here>{text[pos:]}"
        super().__init__(message + where)
        self.pos = pos


_TOKEN = re.compile(r"[ \t\r]*(?:(\d+(?:\.\d*)?|\.\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()=;,])|(\n))")


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos] in " \t\r":
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise GrammarError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(1) if m.group(1) else m.start(2) if m.group(2) else m.start(3) if m.group(3) else m.start(4)
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            toks.append(("id", m.group(2), start))
        elif m.group(3):
            op = "^" if m.group(3) == "**" else m.group(3)
            toks.append(("op", op, start))
        else:
            toks.append(("op", ";", start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Linear:
    """Integer combination of angle variables plus a rational multiple of pi."""

    def __init__(self, coefs=None, pi=Fraction(0)):
        self.coefs: dict[str, Fraction] = {k: v for k, v in (coefs or {}).items() if v}
        self.pi = Fraction(pi)

    def __add__(self, o: "_Linear"):
        c = dict(self.coefs)
        for k, v in o.coefs.items():
            c[k] = c.get(k, 0) + v
        return _Linear(c, self.pi + o.pi)

    def scale(self, f: Fraction):
        return _Linear({k: v * f for k, v in self.coefs.items()}, self.pi * f)


_RESERVED = {"pi", "I", "sin", "cos", "expi"}


class _Parser:
    def __init__(self, text, variables, bindings):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = dict(variables)
        self.bindings = dict(bindings or {})

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        t = self.toks[self.i]
        if (kind and t[0] != kind) or (value is not None and t[1] != value):
            want = value or kind
            got = t[1] or "end of input"
            raise GrammarError(f"expected {want!r}, found {got!r}", self.text, t[2])
        self.i += 1
        return t

    def program(self) -> dict[str, PolyExpr]:
        out: dict[str, PolyExpr] = {}
        anon = 0
        while self.peek()[0] != "end":
            if self.peek()[1] == ";":
                self.i += 1
                continue
            name = None
            if self.peek()[0] == "id" and self.toks[self.i + 1][1] == "=":
                name = self.take("id")[1]
                if name in _RESERVED or name in self.variables:
                    raise GrammarError(f"cannot assign to {name!r}", self.text, self.toks[self.i - 1][2])
                self.take("op", "=")
            val = self._finish(self.expr())
            if name is None:
                name = f"_{anon}"
                anon += 1
            out[name] = val
            self.bindings[name] = val
            if self.peek()[0] != "end":
                self.take("op", ";")
        return out

    def _finish(self, v):
        if isinstance(v, _Linear):
            raise GrammarError("angle variable or pi used outside sin/cos/expi", self.text, self.peek()[2])
        return v

    def expr(self):
        v = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            w = self.term()
            v = self._addsub(v, w, op)
        return v

    def _addsub(self, a, b, op):
        if isinstance(a, _Linear) or isinstance(b, _Linear):
            if not (isinstance(a, _Linear) and isinstance(b, _Linear)):
                raise GrammarError("cannot mix angle arguments with ordinary terms", self.text, self.peek()[2])
            return a + (b.scale(Fraction(-1)) if op == "-" else b)
        return a + b if op == "+" else a - b

    def term(self):
        v = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            w = self.unary()
            v = self._muldiv(v, w, op, pos)
        return v

    def _const(self, v, pos) -> Fraction:
        if isinstance(v, PolyExpr) and v.is_constant():
            c = v.constant_value()
            if c.is_real():
                return c.re
        raise GrammarError("angle arguments may only be scaled by real constants", self.text, pos)

    def _muldiv(self, a, b, op, pos):
        if op == "/":
            if isinstance(b, _Linear) or not b.is_constant():
                raise GrammarError("division by a non-constant", self.text, pos)
            if b.constant_value() == 0:
                raise GrammarError("division by zero", self.text, pos)
            if isinstance(a, _Linear):
                return a.scale(1 / self._const(b, pos))
            return a / b
        if isinstance(a, _Linear) and isinstance(b, _Linear):
            raise GrammarError("product of two angle forms", self.text, pos)
        if isinstance(a, _Linear):
            return a.scale(self._const(b, pos))
        if isinstance(b, _Linear):
            return b.scale(self._const(a, pos))
        return a * b

    def unary(self):
        t = self.peek()
        if t[1] in ("+", "-") and t[0] == "op":
            self.i += 1
            v = self.unary()
            if t[1] == "+":
                return v
            return v.scale(Fraction(-1)) if isinstance(v, _Linear) else -v
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            pos = self.take()[2]
            e = self.peek()
            if e[0] != "num" or not e[1].isdigit():
                raise GrammarError("exponent must be a non-negative integer", self.text, e[2])
            self.i += 1
            if isinstance(base, _Linear):
                raise GrammarError("cannot raise an angle form to a power", self.text, pos)
            return base ** int(e[1])
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.i += 1
            return PolyExpr.const(Fraction(val))
        if kind == "op" and val == "(":
            self.i += 1
            v = self.expr()
            self.take("op", ")")
            return v
        if kind == "id":
            self.i += 1
            if val in ("sin", "cos", "expi"):
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                return self._trig(val, arg, pos)
            if val == "pi":
                return _Linear(pi=Fraction(1))
            if val == "I":
                return PolyExpr.const(GQ(0, 1))
            if val in self.variables:
                if self.variables[val] is VarKind.ANGLE:
                    return _Linear({val: Fraction(1)})
                return PolyExpr.line(val).with_variables({val: VarKind.LINE})
            if val in self.bindings:
                b = self.bindings[val]
                return b if isinstance(b, PolyExpr) else PolyExpr.const(to_fraction(b))
            raise GrammarError(f"unknown name {val!r}", self.text, pos)
        raise GrammarError(f"unexpected {val or 'end of input'!r}", self.text, pos)

    def _trig(self, fn, arg, pos):
        if isinstance(arg, PolyExpr):
            if arg.is_zero():
                arg = _Linear()
            else:
                raise GrammarError(f"{fn}() argument must be a combination of angle variables", self.text, pos)
        idx = {}
        for k, v in arg.coefs.items():
            if v.denominator != 1:
                raise GrammarError(f"{fn}() coefficients must be integers", self.text, pos)
            idx[k] = int(v)
        if (arg.pi * 2).denominator != 1:
            raise GrammarError(f"{fn}() phase must be a multiple of pi/2", self.text, pos)
        ctx = {k: VarKind.ANGLE for k in idx}
        if fn == "cos":
            return PolyExpr.cos(idx, arg.pi).with_variables(ctx)
        if fn == "sin":
            return PolyExpr.sin(idx, arg.pi).with_variables(ctx)
        from .exact_poly import _exp_i_pi

        return PolyExpr.fourier(idx, _exp_i_pi(arg.pi), ctx)


def parse_program(text: str, variables: Mapping[str, VarKind], bindings: Mapping[str, object] | None = None) -> dict[str, PolyExpr]:
    """Parse ``name = expr`` statements; later statements may use earlier names."""
    out = _Parser(text, variables, bindings).program()
    return {k: v.with_variables(variables) for k, v in out.items()}


def parse_expr(text: str, variables: Mapping[str, VarKind], bindings: Mapping[str, object] | None = None) -> PolyExpr:
    """Parse a single expression (a leading ``name =`` is allowed and ignored)."""
    prog = parse_program(text, variables, bindings)
    if len(prog) != 1:
        raise GrammarError(f"expected one expression, found {len(prog)}")
    return next(iter(prog.values()))


# -- printing ---------------------------------------------------------------


def _fmt_linear(idx) -> str:
    out = ""
    for n, e in idx:
        mag = abs(e)
        t = n if mag == 1 else f"{mag}*{n}"
        if not out:
            out = t if e > 0 else f"-{t}"
        else:
            out += f" + {t}" if e > 0 else f" - {t}"
    return out


def _fmt_line(line) -> list[str]:
    return [n if e == 1 else f"{n}^{e}" for n, e in line]


def _fmt_coef(c: GaussianRational) -> str:
    if c.im == 0:
        return fraction_str(c.re)
    return f"({fraction_str(c.re)} + {fraction_str(c.im)}*I)"


def format_expr(f: PolyExpr) -> str:
    """Canonical text for f; ``parse_expr(format_expr(f), f.variables) == f``."""
    pieces: list[tuple[tuple, Fraction | GaussianRational, list[str]]] = []
    real = f.is_real()
    for m, c in sorted(f.terms.items()):
        line = tuple((n, e) for n, e in m if f.variables[n] is VarKind.LINE)
        ang = tuple((n, e) for n, e in m if f.variables[n] is VarKind.ANGLE)
        factors = _fmt_line(line)
        if not ang:
            pieces.append(((line, ang, 0), c.re if c.is_real() else c, factors))
        elif not real:
            pieces.append(((line, ang, 3), c, factors + [f"expi({_fmt_linear(ang)})"]))
        elif ang[0][1] > 0:
            arg = _fmt_linear(ang)
            if c.re:
                pieces.append(((line, ang, 1), 2 * c.re, factors + [f"cos({arg})"]))
            if c.im:
                pieces.append(((line, ang, 2), -2 * c.im, factors + [f"sin({arg})"]))
    if not pieces:
        return "0"
    out = ""
    for _, c, factors in pieces:
        if isinstance(c, GaussianRational):
            body = "*".join([_fmt_coef(c)] + factors)
            out += (" + " if out else "") + body
            continue
        neg = c < 0
        mag = abs(c)
        if factors and mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([fraction_str(mag)] + factors)
        if not out:
            out = f"-{body}" if neg else body
        else:
            out += f" - {body}" if neg else f" + {body}"
    return out
