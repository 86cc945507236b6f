"""Reduction of rank-2 systems by their Noether momenta to a planar curvature law.

Fixing ``p_i = c_i`` for the cyclic coordinates and the energy ``H = 1/2``
leaves arclength-parametrized planar curves ``x' = cos z, y' = sin z`` whose
curvature ``z' = Q(x, y)`` is a polynomial.  This module computes ``Q``,
brings it to a short normal form by a Euclidean motion of the plane, and
provides the conserved quantity of the rotationally symmetric case together
with a symbolic check of the contact form whose Reeb field is the flow.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .carnot import SRSystem, catalog_lookup
from .exactpoly import Poly, format_poly, poisson_bracket


class StructuralError(ValueError):
    pass


class ReductionInputError(ValueError):
    pass


class SingularPointError(ValueError):
    pass


# the plane polynomial Q(x, y) lives in Poly(2, 0)


X_VAR = Poly.x(1, 2, 0)
Y_VAR = Poly.x(2, 2, 0)


def format_xy(f: Poly) -> str:
    """Print a plane polynomial with ``x``, ``y`` instead of ``x1``, ``x2``."""
    s = format_poly(f)
    return re.sub(r"x([12])", lambda m: "x" if m.group(1) == "1" else "y", s)


def _constants_dict(sys: SRSystem, constants) -> dict[int, Fraction]:
    D = sys.dim
    if isinstance(constants, Mapping):
        cs = {int(k): Fraction(v) for k, v in constants.items()}
    else:
        vals = list(constants)
        if len(vals) != D - 2:
            raise ReductionInputError(f"expected {D - 2} constants c3..c{D}")
        cs = {i + 3: Fraction(v) for i, v in enumerate(vals)}
    for i in cs:
        if not 3 <= i <= D:
            raise ReductionInputError(f"constant index {i} outside 3..{D}")
    return {i: cs.get(i, Fraction(0)) for i in range(3, D + 1)}


def symplectic_reduce(sys: SRSystem | str, constants) -> Poly:
    """Curvature law ``Q = -{xi_1, xi_2}`` restricted to ``p_i = c_i`` (``i >= 3``)."""
    if isinstance(sys, str):
        sys = catalog_lookup(sys)
    D = sys.dim
    if not sys.obstruct_ready:
        raise StructuralError(f"{sys.name}: Hamiltonian depends on x3..x{D}")
    xi1, xi2 = sys.frame
    want = {(xi1, 1): 1, (xi1, 2): 0, (xi2, 1): 0, (xi2, 2): 1}
    for (f, j), v in want.items():
        dj = f.diff(("p", j))
        if dj != Poly.constant(v, D, D):
            raise StructuralError(
                f"{sys.name}: frame is not of the form p1 + ..., p2 + ... "
                f"(d/dp{j} of a frame field is {format_poly(dj)})")
    cs = _constants_dict(sys, constants)
    br = -poisson_bracket(xi1, xi2)
    out: dict[tuple[int, int], Fraction] = {}
    for e, c in br.items():
        if any(e[2:D]):
            raise StructuralError("curvature law depends on x3..xD")
        if e[D] or e[D + 1]:
            raise StructuralError("curvature law still depends on p1 or p2")
        val = c
        for i in range(3, D + 1):
            if e[D + i - 1]:
                val *= cs[i] ** e[D + i - 1]
        key = (e[0], e[1])
        out[key] = out.get(key, 0) + val
    return Poly(2, 0, out)


# normal forms


@dataclass
class ReducedSystem:
    """Curvature law in normal form.

    ``kind`` is one of ``Q1`` (``a x^2 + b y``), ``Q2`` (``a x^2 + b y^2 + c``),
    ``constant`` or ``degenerate``.  New coordinates are
    ``(X, Y) = rotation @ (x, y) + shift`` and the heading becomes
    ``z + angle``; ``exact`` is False when the rotation needed irrational
    entries and the parameters are floats.
    """

    kind: str
    params: tuple
    Q: Poly
    rotation: tuple = ((1, 0), (0, 1))
    shift: tuple = (0, 0)
    angle: float = 0.0
    exact: bool = True
    note: str = ""
    constants: dict = field(default_factory=dict)

    @property
    def a(self):
        if self.kind == "constant":
            return 0
        return self.params[0] if self.params else 0

    @property
    def b(self):
        return self.params[1] if len(self.params) > 1 else 0

    @property
    def c(self):
        if self.kind == "constant":
            return self.params[0]
        return self.params[2] if len(self.params) > 2 else 0

    def normal_form(self) -> Poly:
        if not self.exact:
            raise ReductionInputError("normal form with irrational rotation has float parameters")
        if self.kind == "Q1":
            return self.a * X_VAR * X_VAR + self.b * Y_VAR
        if self.kind == "Q2":
            return self.a * X_VAR * X_VAR + self.b * Y_VAR * Y_VAR + self.c
        return self.Q

    def curvature(self):
        """Float evaluator ``(x, y) -> Q`` in normalized coordinates."""
        a, b, c = (float(v) for v in (self.a, self.b, self.c))
        if self.kind == "Q1":
            return lambda x, y: a * x * x + b * y
        if self.kind in ("Q2", "constant"):
            return lambda x, y: a * x * x + b * y * y + c
        return lambda x, y: self.Q.evaluate_float((x, y))

    def map_text(self) -> str:
        (r11, r12), (r21, r22) = self.rotation
        s1, s2 = self.shift

        def lin(p, q, s):
            return format_xy(Poly(2, 0, {(1, 0): Fraction(p), (0, 1): Fraction(q),
                                         (0, 0): Fraction(s)})) if self.exact else (
                f"{float(p):.17g} x + {float(q):.17g} y + {float(s):.17g}")

        return f"x->{lin(r11, r12, s1)}, y->{lin(r21, r22, s2)}"

    def to_text(self) -> str:
        names = ("c",) if self.kind == "constant" else ("a", "b", "c")
        parts = [f"kind {self.kind}"]
        parts += [f"{n}={_fmt_num(v)}" for n, v in zip(names, self.params)]
        parts.append("map: " + self.map_text())
        return "; ".join(parts)


def _fmt_num(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return f"{v:.17g}"


def parse_reduced(text: str) -> tuple[str, dict[str, Fraction]]:
    """Read back ``kind ...; a=...; b=...`` (the map is not parsed)."""
    fields = [f.strip() for f in text.split(";")]
    if not fields or not fields[0].startswith("kind "):
        raise ReductionInputError(f"bad reduced-system text: {text!r}")
    kind = fields[0][5:].strip()
    params = {}
    for f in fields[1:]:
        if f.startswith("map:"):
            break
        k, _, v = f.partition("=")
        params[k.strip()] = Fraction(v.strip())
    return kind, params


def _is_square(q: Fraction) -> Fraction | None:
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def normalize_Q(Q: Poly, constants: dict | None = None) -> ReducedSystem:
    """Bring ``Q`` of degree at most 2 to a normal form by a rigid motion of the plane."""
    if Q.num_base != 2 or Q.num_mom != 0:
        raise ReductionInputError("Q must be a polynomial in x, y only")
    if Q.degree() > 2:
        raise ReductionInputError("Q has degree above 2")
    co = lambda i, j: Q.coeff((i, j))
    A, B, C = co(2, 0), co(1, 1), co(0, 2)
    Dx, Ey, F = co(1, 0), co(0, 1), co(0, 0)
    consts = dict(constants or {})

    if A == B == C == 0:
        if Dx == Ey == 0:
            return ReducedSystem("constant", (F,), Q, constants=consts)
        return ReducedSystem("degenerate", (Fraction(0),), Q, constants=consts,
                             note="a = 0: Q is affine, the flow fibers over a 2D flow")

    if B == 0 and (A == 0 or C == 0):
        rot = ((1, 0), (0, 1))
        angle = 0.0
        if A == 0:
            # quadratic in y only: swap the axes by a quarter turn
            A, C, Dx, Ey = C, A, Ey, -Dx
            rot = ((0, 1), (-1, 0))
            angle = -math.pi / 2
        return _finish_rank1(Q, A, Dx, Ey, F, rot, angle, consts)

    if B == 0:
        sx, sy = Dx / (2 * A), Ey / (2 * C)
        cc = F - A * sx * sx - C * sy * sy
        return ReducedSystem("Q2", (A, C, cc), Q, ((1, 0), (0, 1)), (sx, sy), 0.0, True,
                             constants=consts)

    # cross term: diagonalize by a rotation
    disc = (A - C) ** 2 + B * B
    root = _is_square(disc)
    if root is not None:
        lam1 = (A + C + root) / 2
        u, v = B, 2 * (lam1 - A)  # eigenvector for lam1, up to scale
        norm = _is_square(u * u + v * v)
        if norm is not None:
            cphi, sphi = u / norm, v / norm
            return _rotate_exact(Q, cphi, sphi, consts)
    return _rotate_float(Q, A, B, C, Dx, Ey, F, consts)


def _finish_rank1(Q, A, Dx, Ey, F, rot, angle, consts) -> ReducedSystem:
    # A X^2 + Dx X + Ey Y + F  in the (possibly rotated) frame
    sx = Dx / (2 * A)
    rest = F - A * sx * sx
    if Ey == 0:
        return ReducedSystem("degenerate", (A, Fraction(0)), Q, rot, (sx, 0), angle, True,
                             note="b = 0: Q depends on one coordinate, the flow fibers "
                                  "over a 2D flow", constants=consts)
    sy = rest / Ey
    return ReducedSystem("Q1", (A, Ey), Q, rot, (sx, sy), angle, True, constants=consts)


def _rotate_exact(Q, cphi, sphi, consts) -> ReducedSystem:
    # old (x, y) = R^T (X, Y) with R = [[c, s], [-s, c]]
    X, Y = X_VAR, Y_VAR
    xo = cphi * X - sphi * Y
    yo = sphi * X + cphi * Y
    Qn = _compose(Q, xo, yo)
    inner = normalize_Q(Qn, consts)
    if not inner.exact:
        return inner
    (r11, r12), (r21, r22) = inner.rotation
    rot = ((r11 * cphi - r12 * sphi, r11 * sphi + r12 * cphi),
           (r21 * cphi - r22 * sphi, r21 * sphi + r22 * cphi))
    angle = inner.angle - math.atan2(float(sphi), float(cphi))
    return ReducedSystem(inner.kind, inner.params, Q, rot, inner.shift, angle, True,
                         inner.note, consts)


def _compose(Q: Poly, xo: Poly, yo: Poly) -> Poly:
    out = Poly.zero(2, 0)
    for (i, j), c in Q.items():
        out = out + c * (xo ** i) * (yo ** j)
    return out


def _rotate_float(Q, A, B, C, Dx, Ey, F, consts) -> ReducedSystem:
    A, B, C, Dx, Ey, F = (float(v) for v in (A, B, C, Dx, Ey, F))
    phi = 0.5 * math.atan2(B, A - C)
    cp, sp = math.cos(phi), math.sin(phi)
    # Q in rotated coordinates X = c x + s y, Y = -s x + c y
    a = A * cp * cp + B * cp * sp + C * sp * sp
    b = A * sp * sp - B * cp * sp + C * cp * cp
    dX = Dx * cp + Ey * sp
    dY = -Dx * sp + Ey * cp
    rot = ((cp, sp), (-sp, cp))
    if abs(b) < 1e-14 * max(abs(a), 1.0):
        sx = dX / (2 * a)
        if abs(dY) < 1e-14:
            return ReducedSystem("degenerate", (a, 0.0), Q, rot, (sx, 0.0), -phi, False,
                                 "b = 0: Q depends on one coordinate", consts)
        sy = (F - a * sx * sx) / dY
        return ReducedSystem("Q1", (a, dY), Q, rot, (sx, sy), -phi, False,
                             "rotation with irrational entries; parameters are floats", consts)
    sx, sy = dX / (2 * a), dY / (2 * b)
    cc = F - a * sx * sx - b * sy * sy
    return ReducedSystem("Q2", (a, b, cc), Q, rot, (sx, sy), -phi, False,
                         "rotation with irrational entries; parameters are floats", consts)


def apply_map(red: ReducedSystem, x: float, y: float, z: float) -> tuple[float, float, float]:
    """Old ``(x, y, z)`` to normalized coordinates."""
    (r11, r12), (r21, r22) = red.rotation
    s1, s2 = red.shift
    return (float(r11) * x + float(r12) * y + float(s1),
            float(r21) * x + float(r22) * y + float(s2), z + red.angle)


def reduce_system_constants(sys: SRSystem | str, constants) -> ReducedSystem:
    """``symplectic_reduce`` followed by ``normalize_Q``."""
    if isinstance(sys, str):
        sys = catalog_lookup(sys)
    Q = symplectic_reduce(sys, constants)
    return normalize_Q(Q, _constants_dict(sys, constants))


# the rotationally symmetric case


def elliptic_invariant(a, c):
    """``F = a r^4 / 4 + c r^2 / 2 - r sin(z - phi)`` in polar coordinates of ``(x, y)``.

    Conserved along ``x' = cos z, y' = sin z, z' = a (x^2 + y^2) + c``.
    """
    a, c = float(a), float(c)

    def F(x: float, y: float, z: float) -> float:
        r2 = x * x + y * y
        if r2 == 0.0:
            raise SingularPointError("polar angle undefined at r = 0")
        r = math.sqrt(r2)
        # r sin(z - phi) = sin z * x - cos z * y
        return 0.25 * a * r2 * r2 + 0.5 * c * r2 - (x * math.sin(z) - y * math.cos(z))

    return F


# contact form check: x, y, S = sin z, C = cos z as a Poly in four base variables


_NV = 4
_XS, _YS, _SS, _CS = (Poly.x(i, _NV, 0) for i in range(1, 5))


def _mod_circle(f: Poly) -> Poly:
    """Reduce modulo ``S^2 + C^2 = 1`` by eliminating ``S^2``."""
    out = Poly.zero(_NV, 0)
    one_minus_c2 = Poly.constant(1, _NV, 0) - _CS * _CS
    for e, coef in f.items():
        q, r = divmod(e[2], 2)
        mono = Poly(_NV, 0, {(e[0], e[1], r, e[3]): coef})
        out = out + mono * one_minus_c2 ** q
    return out


def _dz(f: Poly) -> Poly:
    return _CS * f.diff(("x", 3)) - _SS * f.diff(("x", 4))


@dataclass
class ReebReport:
    sign: int | None
    contraction: tuple[str, str, str]
    alpha_of_field: str
    divergence: str
    tried: dict

    @property
    def ok(self) -> bool:
        return self.sign is not None


def reeb_check(a, b, c) -> ReebReport:
    """Find the sign making ``alpha`` annihilate ``i_X d alpha`` for ``X = (C, S, Q2)``.

    ``alpha = s (1/3 (a x^3 dy - b y^3 dx) + c/2 (x dy - y dx)) + C dx + S dy``.
    """
    a, b, c = Fraction(a), Fraction(b), Fraction(c)
    x, y, S, C = _XS, _YS, _SS, _CS
    Q = a * x * x + b * y * y + c
    field_ = (C, S, Q)
    tried = {}
    found = None
    zero = Poly.zero(_NV, 0)
    for sign in (1, -1):
        P = sign * (Fraction(-1, 3) * b * y ** 3 - Fraction(1, 2) * c * y) + C
        R = sign * (Fraction(1, 3) * a * x ** 3 + Fraction(1, 2) * c * x) + S
        comps = (P, R, zero)
        # d alpha as an antisymmetric matrix w[i][j] on (x, y, z)
        d = [lambda f: f.diff(("x", 1)), lambda f: f.diff(("x", 2)), _dz]
        w = [[d[i](comps[j]) - d[j](comps[i]) for j in range(3)] for i in range(3)]
        contraction = tuple(_mod_circle(sum((field_[i] * w[i][j] for i in range(3)), zero))
                            for j in range(3))
        tried[sign] = tuple(format_poly(t) for t in contraction)
        if all(t.is_zero() for t in contraction) and found is None:
            found = sign
            alpha_x = _mod_circle(P * C + R * S)
            kept = (contraction, alpha_x)
    div = _mod_circle(C.diff(("x", 1)) + S.diff(("x", 2)) + _dz(Q))
    names = lambda s: s.replace("x3", "S").replace("x4", "C").replace("x1", "x").replace("x2", "y")
    if found is None:
        return ReebReport(None, tried[-1], "", names(format_poly(div)), tried)
    contraction, alpha_x = kept
    return ReebReport(found, tuple(names(format_poly(t)) for t in contraction),
                      names(format_poly(alpha_x)), names(format_poly(div)), tried)
