"""Verification of polynomial first integrals: commutation, involutivity,
identities among integrals and functional independence."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .carnot import SRSystem, catalog_lookup, solve_right_invariant
from .exactpoly import Poly, parse_poly, poisson_bracket
from .linalg import rank_rational


class DivisionError(ArithmeticError):
    pass


@dataclass
class IntegralSet:
    system: str
    members: dict[str, Poly]
    claimed_involutive: bool = True
    claimed_independent_count: int = 0
    extras: dict[str, Poly] = field(default_factory=dict)
    identities: list[tuple[str, Poly, Poly]] = field(default_factory=list)
    # extras that commute with H but not with the whole family
    noninvolutive: tuple[str, ...] = ()


def check_commute(h: Poly, f: Poly) -> bool:
    return poisson_bracket(h, f).is_zero()


def check_involutive(s: IntegralSet) -> list[list[bool]]:
    polys = list(s.members.values())
    n = len(polys)
    out = [[True] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ok = poisson_bracket(polys[i], polys[j]).is_zero()
            out[i][j] = out[j][i] = ok
    return out


def check_identity(lhs: Poly, rhs: Poly) -> bool:
    return lhs == rhs


def exact_divide(f: Poly, g: Poly) -> Poly:
    """Quotient ``q`` with ``f = g q``; raises :class:`DivisionError` if inexact."""
    if g.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    lead_g, cg = g.terms()[0]
    q = Poly.zero(f.num_base, f.num_mom)
    r = f
    while not r.is_zero():
        lead_r, cr = r.terms()[0]
        diff = tuple(a - b for a, b in zip(lead_r, lead_g))
        if any(v < 0 for v in diff):
            raise DivisionError("polynomial division leaves a remainder")
        t = Poly(f.num_base, f.num_mom, {diff: cr / cg})
        q = q + t
        r = r - t * g
    return q


def jacobian_rank_at(s: IntegralSet | list[Poly], points) -> int:
    """Maximum over ``points`` of the exact rank of the members' Jacobian.

    A positive value is a rigorous lower bound for the generic rank.
    """
    polys = list(s.members.values()) if isinstance(s, IntegralSet) else list(s)
    if not points:
        raise ValueError("need at least one point")
    nv = polys[0].nvars
    grads = [[f.diff(k) for k in range(nv)] for f in polys]
    best = 0
    for pt in points:
        rows = [[g(pt) for g in row] for row in grads]
        best = max(best, rank_rational(rows))
    return best


def sample_points(nvars: int, count: int = 5, seed: int = 20150711, spread: int = 7):
    rng = random.Random(seed)
    return [[Fraction(rng.randint(-spread * 10, spread * 10), rng.randint(1, 9))
             for _ in range(nvars)] for _ in range(count)]


# claimed integral sets


def _p(i, D):
    return Poly.p(i, D, D)


def claimed_integrals(name: str) -> list[IntegralSet]:
    """Known integral families of the integrable (and partially integrable)
    catalog systems, together with the dependency identities and extras."""
    sys = catalog_lookup(name)
    D = sys.dim
    H = sys.hamiltonian
    w = sys.realization.omegas
    th = sys.realization.thetas
    P = lambda s: parse_poly(s, D, D)  # noqa: E731
    out: list[IntegralSet] = []

    if name == "heis3":
        I4 = P("p2 + x1 p3")
        out.append(IntegralSet(name, {"I1": H, "I2": P("p1"), "I3": P("p3")}, True, 3,
                               extras={"I4": I4}, noninvolutive=("I4",)))
        # second family: Casimir w3 plus a right-invariant form
        out.append(IntegralSet(name + ":casimir", {"I1": H, "C": w[3], "theta1": th[1]},
                               True, 3))
    elif name == "engel":
        I2, I3, I4 = th[2], th[3], th[4]
        I5 = P("p1")
        out.append(IntegralSet(name, {"I1": H, "I2": I2, "I3": I3, "I4": I4}, True, 4,
                               extras={"I5": I5}, noninvolutive=("I5",)))
        J4 = P("p3^2 - 2 p2 p4")
        out.append(IntegralSet(name + ":J", {"I1": H, "J2": I5, "J3": I4, "J4": J4}, True, 4,
                               identities=[("J4 = I3^2 - 2 I2 I4", J4, I3 * I3 - 2 * I2 * I4),
                                           ("J4 = w3^2 - 2 w2 w4", J4,
                                            w[3] * w[3] - 2 * w[2] * w[4])]))
    elif name == "cartan5":
        Jp, Jm = P("x1 p4 + x2 p5"), P("x1 p4 - x2 p5")
        I2 = (P("p1 p5 - p2 p4") + P("p3^2").scale(Fraction(1, 2))
              + (Jm * Jm).scale(Fraction(1, 2)) + (P("p3") * Jp).scale(Fraction(1, 2)))
        I6 = P("p1 + 1/2 x2 p3 + (x3 - 1/2 x1 x2) p4 + 1/2 x2^2 p5")
        I6b = P("p2 - 1/2 x1 p3 - 1/2 x1^2 p4 + (x3 + 1/2 x1 x2) p5")
        casimir_w = w[1] * w[5] - w[2] * w[4] + (w[3] * w[3]).scale(Fraction(1, 2))
        casimir_t = th[1] * th[5] - th[2] * th[4] + (th[3] * th[3]).scale(Fraction(1, 2))
        out.append(IntegralSet(
            name, {"I1": H, "I2": I2, "I3": P("p3"), "I4": P("p4"), "I5": P("p5")}, True, 5,
            extras={"I6": I6, "I6'": I6b},
            identities=[("I2 = w1 w5 - w2 w4 + w3^2/2", I2, casimir_w),
                        ("I2 = t1 t5 - t2 t4 + t3^2/2", I2, casimir_t)],
            noninvolutive=("I6", "I6'")))
    elif name == "ell6":
        I2 = P("(p1 - 1/2 x2 p3 - x1 x2 p4 - 1/2 x1^2 x2 p6) (p5 + x2 p6)"
               " - (p2 + 1/2 x1 p3 + x1 x2 p5 + 1/2 x1 x2^2 p6) (p4 + x1 p6)"
               " + 1/2 (p3 + x1 p4 + x2 p5 + 1/2 (x1^2 + x2^2) p6)^2")
        I3, I4, I5, I6 = (_p(i, D) for i in (3, 4, 5, 6))
        C = (w[4] * w[4] + w[5] * w[5]).scale(Fraction(1, 2)) - w[3] * w[6]
        t1 = solve_right_invariant(sys.algebra, sys.realization, 1)
        t2 = solve_right_invariant(sys.algebra, sys.realization, 2)
        I2p = t1 * I5 - t2 * I4 + (I3 * I3).scale(Fraction(1, 2))
        K = exact_divide(I2 - I2p, I6)
        out.append(IntegralSet(
            name, {"I1": H, "I2": I2, "I3": I3, "I4": I4, "I5": I5, "I6": I6}, True, 6,
            extras={"C": C, "I2'": I2p, "K": K},
            identities=[("C = (I4^2 + I5^2)/2 - I3 I6", C,
                         (I4 * I4 + I5 * I5).scale(Fraction(1, 2)) - I3 * I6),
                        ("I2 = w1 w5 - w2 w4 + w3^2/2", I2,
                         w[1] * w[5] - w[2] * w[4] + (w[3] * w[3]).scale(Fraction(1, 2)))],
            noninvolutive=("I2'", "K")))
    elif name == "hyp6":
        I3, I4, I5, I6 = (_p(i, D) for i in (3, 4, 5, 6))
        C = w[4] * w[5] - w[3] * w[6]
        out.append(IntegralSet(
            name, {"I1": H, "C": C, "I3": I3, "I4": I4, "I5": I5, "I6": I6}, True, 5,
            identities=[("C = I4 I5 - I3 I6", C, I4 * I5 - I3 * I6)]))
    elif name == "dim8_23568":
        I7 = (w[1] * w[8] - w[2] * w[7] + w[3] * w[6]
              - (w[4] * w[4] + w[5] * w[5]).scale(Fraction(1, 2)))
        C = w[4] * w[7] + w[5] * w[8] - (w[6] * w[6]).scale(Fraction(1, 2))
        I8 = w[1] * w[5] - w[2] * w[4] + (w[3] * w[3]).scale(Fraction(1, 2))
        t = dict(th)
        for i in (1, 2, 3):
            t[i] = solve_right_invariant(sys.algebra, sys.realization, i)
        I7t = (t[1] * t[8] - t[2] * t[7] + t[3] * t[6]
               - (t[4] * t[4] + t[5] * t[5]).scale(Fraction(1, 2)))
        I8p = t[1] * t[5] - t[2] * t[4] + (t[3] * t[3]).scale(Fraction(1, 2))
        members = {"I1": H}
        for n, i in enumerate(range(4, 9), start=2):
            members[f"I{n}"] = _p(i, D)
        members["I7"] = I7
        members["I8"] = I8
        out.append(IntegralSet(
            name, members, True, 8, extras={"C": C, "I8'": I8p},
            identities=[("C = t4 t7 + t5 t8 - t6^2/2", C,
                         P("p4 p7 + p5 p8 - 1/2 p6^2")),
                        ("I7(w) = I7(theta)", I7, I7t)],
            noninvolutive=("I8'",)))
    elif name == "dim7":
        cas = (w[3] * (w[6] * w[6] + w[7] * w[7])
               - (w[4] * w[4] - w[5] * w[5]) * w[6].scale(Fraction(1, 2)) - w[4] * w[5] * w[7])
        pp = [None] + [_p(i, D) for i in range(1, D + 1)]
        cas_p = (pp[3] * (pp[6] * pp[6] + pp[7] * pp[7])
                 - (pp[4] * pp[4] - pp[5] * pp[5]) * pp[6].scale(Fraction(1, 2))
                 - pp[4] * pp[5] * pp[7])
        members = {"I1": H}
        members.update({f"I{i - 1}": _p(i, D) for i in range(3, D + 1)})
        out.append(IntegralSet(name, members, True, D - 1, extras={"cubic Casimir": cas},
                               identities=[("Casimir(w) = Casimir(theta)", cas, cas_p)]))
    elif name in ("par6", "dim8_2358", "gen6"):
        members = {"I1": H}
        members.update({f"I{i - 1}": _p(i, D) for i in range(3, D + 1)})
        out.append(IntegralSet(name, members, True, D - 1))
    else:
        raise KeyError(f"no claimed integrals recorded for {name!r}")
    return out


@dataclass
class IntegralReport:
    name: str
    commute_with_h: dict[str, bool]
    involutive: bool
    extras_commute: dict[str, bool]
    identities: dict[str, bool]
    # extra -> family members it fails to commute with
    noncommuting: dict[str, list[str]]
    jacobian_rank: int | None
    claimed_rank: int

    @property
    def ok(self) -> bool:
        return (all(self.commute_with_h.values()) and self.involutive
                and all(self.extras_commute.values()) and all(self.identities.values())
                and all(self.noncommuting.values())
                and (self.jacobian_rank is None or self.jacobian_rank >= self.claimed_rank))


def verify_integral_set(s: IntegralSet, H: Poly, rank_points: int = 5) -> IntegralReport:
    commute = {k: check_commute(H, f) for k, f in s.members.items()}
    inv = all(all(row) for row in check_involutive(s))
    extras = {k: check_commute(H, f) for k, f in s.extras.items()}
    ids = {label: check_identity(a, b) for label, a, b in s.identities}
    nonc = {e: [k for k, f in s.members.items()
                if not poisson_bracket(s.extras[e], f).is_zero()]
            for e in s.noninvolutive}
    rank = None
    if s.claimed_independent_count and rank_points:
        rank = jacobian_rank_at(s, sample_points(H.nvars, rank_points))
    return IntegralReport(s.system, commute, inv, extras, ids, nonc, rank,
                          s.claimed_independent_count)


def verify_system(sys: SRSystem | str) -> list[IntegralReport]:
    name = sys if isinstance(sys, str) else sys.name
    H = catalog_lookup(name).hamiltonian
    return [verify_integral_set(s, H) for s in claimed_integrals(name)]
