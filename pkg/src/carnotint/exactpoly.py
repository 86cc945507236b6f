"""Sparse multivariate polynomials on phase space with exact rational coefficients.

A :class:`Poly` lives on ``R^n(x) x R^m(p)``: ``num_base`` base coordinates
``x1..xn`` followed by ``num_mom`` momenta ``p1..pm``.  Terms are stored as a
mapping from the concatenated exponent vector to a nonzero ``Fraction``.
Values are immutable; every operation returns a new canonical polynomial.

The Poisson bracket uses the convention

    {f, g} = sum_i  df/dx_i * dg/dp_i - df/dp_i * dg/dx_i

so that ``dF/dt = {F, H}`` along ``x' = dH/dp, p' = -dH/dx``.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import reduce
from numbers import Rational
from typing import Iterable, Mapping


class DimensionError(ValueError):
    """Variable counts disagree or a variable id is out of range."""


class ParseError(ValueError):
    pass


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"coefficient must be rational, got {type(c).__name__}")


def _grlex_key(exps: tuple[int, ...]):
    return (sum(exps), exps)


class Poly:
    """Polynomial in ``x1..xn, p1..pm`` with rational coefficients."""

    __slots__ = ("num_base", "num_mom", "_terms", "_hash")

    def __init__(self, num_base: int, num_mom: int, terms: Mapping | Iterable = ()):
        if num_base < 0 or num_mom < 0:
            raise DimensionError("variable counts must be non-negative")
        self.num_base = num_base
        self.num_mom = num_mom
        nv = num_base + num_mom
        acc: dict[tuple[int, ...], Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for exps, c in items:
            exps = tuple(exps)
            if len(exps) != nv or any(e < 0 for e in exps):
                raise DimensionError(f"bad exponent vector {exps} for {nv} variables")
            c = _as_fraction(c)
            if c:
                acc[exps] = acc.get(exps, 0) + c
        self._terms = {e: c for e, c in acc.items() if c}
        self._hash = None

    # construction helpers

    @classmethod
    def _raw(cls, num_base, num_mom, terms: dict) -> "Poly":
        # terms already canonical (nonzero Fraction values, correct length)
        obj = cls.__new__(cls)
        obj.num_base = num_base
        obj.num_mom = num_mom
        obj._terms = terms
        obj._hash = None
        return obj

    @classmethod
    def zero(cls, num_base: int, num_mom: int) -> "Poly":
        return cls._raw(num_base, num_mom, {})

    @classmethod
    def constant(cls, c, num_base: int, num_mom: int) -> "Poly":
        return cls(num_base, num_mom, {(0,) * (num_base + num_mom): c})

    @classmethod
    def x(cls, i: int, num_base: int, num_mom: int) -> "Poly":
        return cls.variable(("x", i), num_base, num_mom)

    @classmethod
    def p(cls, i: int, num_base: int, num_mom: int) -> "Poly":
        return cls.variable(("p", i), num_base, num_mom)

    @classmethod
    def variable(cls, var, num_base: int, num_mom: int) -> "Poly":
        k = var_index(var, num_base, num_mom)
        e = [0] * (num_base + num_mom)
        e[k] = 1
        return cls._raw(num_base, num_mom, {tuple(e): Fraction(1)})

    @classmethod
    def parse(cls, text: str, num_base: int, num_mom: int) -> "Poly":
        return parse_poly(text, num_base, num_mom)

    # basic protocol

    @property
    def nvars(self) -> int:
        return self.num_base + self.num_mom

    def terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms in descending graded-lexicographic order."""
        return sorted(self._terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    def coeff(self, exps) -> Fraction:
        return self._terms.get(tuple(exps), Fraction(0))

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other):
        if isinstance(other, Poly):
            return (self.num_base == other.num_base and self.num_mom == other.num_mom
                    and self._terms == other._terms)
        if isinstance(other, (int, Rational)):
            if not other:
                return not self._terms
            return self._terms == {(0,) * self.nvars: Fraction(other)}
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num_base, self.num_mom, frozenset(self._terms.items())))
        return self._hash

    def __repr__(self):
        return f"Poly({self.num_base}, {self.num_mom}, {str(self)!r})"

    def __str__(self):
        return format_poly(self)

    # arithmetic

    def _check(self, other: "Poly"):
        if self.num_base != other.num_base or self.num_mom != other.num_mom:
            raise DimensionError(
                f"variable counts differ: ({self.num_base},{self.num_mom}) vs "
                f"({other.num_base},{other.num_mom})")

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            self._check(other)
            return other
        if isinstance(other, (int, Rational, str)):
            return Poly.constant(other, self.num_base, self.num_mom)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for e, c in other._terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Poly._raw(self.num_base, self.num_mom, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.num_base, self.num_mom, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Rational)):
            return self.scale(other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly._raw(self.num_base, self.num_mom, {e: c for e, c in out.items() if c})

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Poly.constant(1, self.num_base, self.num_mom)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def scale(self, c) -> "Poly":
        c = _as_fraction(c)
        if not c:
            return Poly.zero(self.num_base, self.num_mom)
        return Poly._raw(self.num_base, self.num_mom, {e: c * v for e, v in self._terms.items()})

    # calculus and substitution

    def diff(self, var) -> "Poly":
        """Formal partial derivative by ``var`` (``"x2"``, ``("p", 4)`` or a flat index)."""
        k = var_index(var, self.num_base, self.num_mom)
        out = {}
        for e, c in self._terms.items():
            n = e[k]
            if n:
                e2 = e[:k] + (n - 1,) + e[k + 1:]
                out[e2] = c * n
        return Poly._raw(self.num_base, self.num_mom, out)

    def subs(self, assignments: Mapping) -> "Poly":
        """Substitute rational values for some variables; the rest stay symbolic."""
        vals = {}
        for var, v in assignments.items():
            vals[var_index(var, self.num_base, self.num_mom)] = _as_fraction(v)
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self._terms.items():
            e2 = list(e)
            for k, v in vals.items():
                if e[k]:
                    c = c * v ** e[k]
                    e2[k] = 0
            if c:
                t = tuple(e2)
                out[t] = out.get(t, 0) + c
        return Poly._raw(self.num_base, self.num_mom, {e: c for e, c in out.items() if c})

    def __call__(self, point) -> Fraction:
        """Evaluate at a full point ``(x1..xn, p1..pm)``."""
        if len(point) != self.nvars:
            raise DimensionError(f"expected {self.nvars} values, got {len(point)}")
        vals = [_as_fraction(v) for v in point]
        total = Fraction(0)
        for e, c in self._terms.items():
            t = c
            for v, n in zip(vals, e):
                if n:
                    t *= v ** n
            total += t
        return total

    def evaluate_float(self, point) -> float:
        total = 0.0
        for e, c in self._terms.items():
            t = float(c)
            for v, n in zip(point, e):
                if n:
                    t *= v ** n
            total += t
        return total

    # structure queries

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def momentum_degrees(self) -> set[int]:
        nb = self.num_base
        return {sum(e[nb:]) for e in self._terms}

    def base_degree(self) -> int:
        nb = self.num_base
        return max((sum(e[:nb]) for e in self._terms), default=-1)

    def is_homogeneous_in_momenta(self, d: int) -> bool:
        return all(sum(e[self.num_base:]) == d for e in self._terms)

    def depends_on(self, var) -> bool:
        k = var_index(var, self.num_base, self.num_mom)
        return any(e[k] for e in self._terms)

    def support_vars(self) -> set[int]:
        return {k for e in self._terms for k, n in enumerate(e) if n}

    def extend(self, num_base: int, num_mom: int) -> "Poly":
        """Embed into a phase space with at least as many variables."""
        if num_base < self.num_base or num_mom < self.num_mom:
            raise DimensionError("cannot shrink variable counts")
        pad_x = (0,) * (num_base - self.num_base)
        pad_p = (0,) * (num_mom - self.num_mom)
        nb = self.num_base
        return Poly._raw(num_base, num_mom,
                         {e[:nb] + pad_x + e[nb:] + pad_p: c for e, c in self._terms.items()})

    def content_denominator(self) -> int:
        return reduce(lambda a, b: a * b // math.gcd(a, b),
                      (c.denominator for c in self._terms.values()), 1)

    def integer_coefficients(self) -> dict[tuple[int, ...], int]:
        if any(c.denominator != 1 for c in self._terms.values()):
            raise ValueError("polynomial has non-integral coefficients")
        return {e: c.numerator for e, c in self._terms.items()}

    def items(self):
        return self._terms.items()


def var_index(var, num_base: int, num_mom: int) -> int:
    """Flat index of a variable id.

    Accepts ``"x3"``/``"p1"``, ``("x", 3)`` tuples (1-based) or a flat integer
    index into ``(x1..xn, p1..pm)``.
    """
    if isinstance(var, str):
        m = re.fullmatch(r"\s*([xp])\s*(\d+)\s*", var)
        if not m:
            raise DimensionError(f"unknown variable id {var!r}")
        var = (m.group(1), int(m.group(2)))
    if isinstance(var, tuple):
        kind, i = var
        if kind == "x" and 1 <= i <= num_base:
            return i - 1
        if kind == "p" and 1 <= i <= num_mom:
            return num_base + i - 1
        raise DimensionError(f"variable {kind}{i} not declared ({num_base} x, {num_mom} p)")
    if isinstance(var, int) and 0 <= var < num_base + num_mom:
        return var
    raise DimensionError(f"unknown variable id {var!r}")


# ring operations with explicit names


def poly_arith(a: Poly, b: Poly | None, op: str, factor=None) -> Poly:
    if op == "scale":
        return a.scale(factor)
    if b is None:
        raise ValueError(f"operation {op!r} needs two operands")
    a._check(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown operation {op!r}")


def partial_derivative(f: Poly, var) -> Poly:
    return f.diff(var)


def evaluate_partial(f: Poly, assignments: Mapping) -> Poly:
    return f.subs(assignments)


def poisson_bracket(f: Poly, g: Poly) -> Poly:
    """Canonical bracket ``sum_i f_x g_p - f_p g_x`` over the paired coordinates."""
    f._check(g)
    n = f.num_base
    if f.num_mom != n:
        raise DimensionError("Poisson bracket needs as many momenta as base coordinates")
    out: dict[tuple[int, ...], Fraction] = {}
    # term-wise expansion avoids building 4n intermediate polynomials
    for e1, c1 in f._terms.items():
        for e2, c2 in g._terms.items():
            for i in range(n):
                j = n + i
                # df/dx_i * dg/dp_i
                a, b = e1[i], e2[j]
                if a and b:
                    e = [u + v for u, v in zip(e1, e2)]
                    e[i] -= 1
                    e[j] -= 1
                    t = tuple(e)
                    out[t] = out.get(t, 0) + c1 * c2 * a * b
                # - df/dp_i * dg/dx_i
                a, b = e1[j], e2[i]
                if a and b:
                    e = [u + v for u, v in zip(e1, e2)]
                    e[i] -= 1
                    e[j] -= 1
                    t = tuple(e)
                    out[t] = out.get(t, 0) - c1 * c2 * a * b
    return Poly._raw(n, n, {e: c for e, c in out.items() if c})


def clear_denominators(f: Poly) -> tuple[Poly, int]:
    """Return ``(factor * f, factor)`` with ``factor`` the lcm of coefficient denominators."""
    factor = f.content_denominator()
    return f.scale(factor), factor


# text format
#   expr := term (('+'|'-') term)* ; term := rational? factor* ;
#   factor := ('x'|'p') INDEX ('^' UINT)? ; rational := INT ('/' UINT)?

_TOKEN = re.compile(r"\s*(?:(\d+)|([xp])|(\^)|(/)|([+-])|(\*)|(\()|(\)))")


def _tokenize(text: str):
    pos = 0
    toks = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        kind = m.lastindex
        toks.append((kind, m.group(kind)))
    return toks


def parse_poly(text: str, num_base: int, num_mom: int) -> Poly:
    """Parse the plain-text polynomial grammar, e.g. ``"p1 - 1/2 x2 p3 + x1^2 p4"``.

    Parenthesised sub-expressions may be multiplied and raised to powers
    (``(p1 + x2 p3)^2``); ``*`` between factors is optional.
    """
    toks = _tokenize(text)
    pos = 0
    nb, nm = num_base, num_mom

    def peek():
        return toks[pos] if pos < len(toks) else (None, None)

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def expr() -> Poly:
        total = Poly.zero(nb, nm)
        sign = 1
        k, v = peek()
        if k == 5:
            take()
            sign = -1 if v == "-" else 1
        total = total + term().scale(sign)
        while True:
            k, v = peek()
            if k != 5:
                break
            take()
            sign = -1 if v == "-" else 1
            total = total + term().scale(sign)
        return total

    def uint() -> int:
        k, v = take() if pos < len(toks) else (None, None)
        if k != 1:
            raise ParseError("expected an unsigned integer")
        return int(v)

    def term() -> Poly:
        coeff = Fraction(1)
        result = None
        k, _ = peek()
        if k == 1:
            num = uint()
            den = 1
            if peek()[0] == 4:
                take()
                den = uint()
                if den == 0:
                    raise ParseError("zero denominator")
            coeff = Fraction(num, den)
            result = Poly.constant(coeff, nb, nm)
        while True:
            k, v = peek()
            if k == 6:
                take()
                k, v = peek()
            if k == 2:
                take()
                idx = uint()
                f = Poly.variable((v, idx), nb, nm)
            elif k == 7:
                take()
                f = expr()
                if peek()[0] != 8:
                    raise ParseError("missing ')'")
                take()
            elif k == 1 and result is not None:
                # rational factor after a variable, e.g. "x1 1/2"
                num = uint()
                den = 1
                if peek()[0] == 4:
                    take()
                    den = uint()
                f = Poly.constant(Fraction(num, den), nb, nm)
            else:
                break
            if peek()[0] == 3:
                take()
                f = f ** uint()
            result = f if result is None else result * f
        if result is None:
            raise ParseError("empty term")
        return result

    if not toks:
        raise ParseError("empty expression")
    out = expr()
    if pos != len(toks):
        raise ParseError(f"trailing input at token {pos}")
    return out


def format_poly(f: Poly) -> str:
    if f.is_zero():
        return "0"
    nb = f.num_base
    parts = []
    for e, c in f.terms():
        factors = []
        for k, n in enumerate(e):
            if n:
                name = f"x{k + 1}" if k < nb else f"p{k - nb + 1}"
                factors.append(name if n == 1 else f"{name}^{n}")
        mag = abs(c)
        if factors and mag == 1:
            body = " ".join(factors)
        else:
            body = " ".join([str(mag)] + factors)
        parts.append(("-" if c < 0 else "+", body))
    sign, body = parts[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out
