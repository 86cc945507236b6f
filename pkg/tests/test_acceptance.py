"""Acceptance criteria, one PASS/FAIL line each (shown in the terminal summary).

Long runs are marked ``long`` and need ``CARNOTINT_LONG=1``.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from carnotint.carnot import CATALOG_NAMES, catalog_lookup, verify_realization
from carnotint.dynamics import (IntegratorConfig, SectionSpec, State, integrate,
                                invariant_monitor, poincare_section)
from carnotint.exactpoly import parse_poly, poisson_bracket
from carnotint.integrals import (check_commute, claimed_integrals, jacobian_rank_at,
                                 sample_points, verify_integral_set)
from carnotint.obstruct import (INCONCLUSIVE, NO_FINAL, decide, num_equations, num_unknowns,
                                trivial_count)
from carnotint.reduce import normalize_Q, reduce_system_constants, reeb_check
from conftest import record_criterion


def test_criterion_1_counts():
    lam = {(6, 6): 130, (7, 5): 166, (7, 6): 296, (8, 5): 314}
    dims = {("par6", 6, 6, 7): (28512, 20790), ("dim7", 7, 5, 6): (25872, 16632),
            ("dim7", 7, 6, 7): (61776, 41580), ("dim8_2358", 8, 5, 6): (48048, 28512)}
    bad = [k for k, v in lam.items() if trivial_count(*k) != v]
    bad += [k for k, (m, n) in dims.items()
            if (num_equations(k[1], k[2], k[3]), num_unknowns(k[1], k[2], k[3])) != (m, n)]
    assert record_criterion(1, not bad, f"trivial counts and matrix sizes; mismatches {bad}")


def test_criterion_2_desk_verdicts():
    bad = []
    for d, lam in zip((1, 2, 3, 4), (4, 11, 24, 46)):
        rep = decide("par6", d, "exact")
        if not (rep.verdict == NO_FINAL and rep.delta == lam == rep.lambda0):
            bad.append(("par6", d, rep.delta))
    for name in ("dim7", "dim8_2358"):
        for d in (1, 2, 3):
            rep = decide(name, d, "auto")
            if not (rep.verdict == NO_FINAL and rep.delta == rep.lambda0):
                bad.append((name, d, rep.delta))
    assert record_criterion(2, not bad, f"par6 d=1..4 exact, dim7/dim8_2358 d<=3 auto-primes; "
                                        f"failures {bad}")


@pytest.mark.long
@pytest.mark.parametrize("name,d,mode,delta", [
    ("par6", 6, "exact", 130), ("dim7", 5, "exact", 166), ("dim7", 6, 101, 296),
    ("dim8_2358", 5, "exact", 314)])
def test_criterion_3_long_runs(name, d, mode, delta):
    rep = decide(name, d, mode)
    ok = rep.delta == delta and rep.verdict == NO_FINAL
    assert record_criterion("3", ok, f"{name} d={d} mode={mode}: delta {rep.delta} "
                                     f"(expected {delta}), {rep.verdict}")


@pytest.mark.parametrize("p,verdict", [(2, INCONCLUSIVE), (3, INCONCLUSIVE), (5, INCONCLUSIVE),
                                       (7, INCONCLUSIVE), (31, NO_FINAL), (37, NO_FINAL),
                                       (41, NO_FINAL)])
def test_criterion_3_prime_sensitivity(p, verdict):
    rep = decide("dim7", 5, p)
    assert record_criterion("3", rep.verdict == verdict,
                            f"dim7 d=5 mod {p}: {rep.verdict} (delta {rep.delta})")


@pytest.mark.xfail(strict=True, reason="these primes already give the exact defect 166 here")
@pytest.mark.parametrize("p", [11, 13, 17, 19, 23, 29])
def test_criterion_3_prime_sensitivity_middle_primes(p):
    rep = decide("dim7", 5, p)
    ok = rep.verdict == INCONCLUSIVE
    record_criterion("3", ok, f"dim7 d=5 mod {p}: {rep.verdict} (delta {rep.delta}), "
                              f"expected {INCONCLUSIVE}")
    assert ok


def test_criterion_4_positive_controls():
    bad = []
    for name in ("ell6", "cartan5"):
        rep = decide(name, 2, "exact")
        if rep.verdict != INCONCLUSIVE or rep.delta < rep.lambda0 + 1:
            bad.append((name, rep.delta, rep.lambda0))
        I2 = claimed_integrals(name)[0].members["I2"]
        if not check_commute(catalog_lookup(name).hamiltonian, I2):
            bad.append((name, "I2"))
    assert record_criterion(4, not bad, f"ell6 and cartan5 d=2 inconclusive, I2 commutes; "
                                        f"failures {bad}")


def test_criterion_5_integrals():
    bad = []
    for name in ("heis3", "engel", "cartan5", "ell6", "hyp6", "dim8_23568", "dim7"):
        H = catalog_lookup(name).hamiltonian
        for s in claimed_integrals(name):
            rep = verify_integral_set(s, H, rank_points=0)
            if not rep.ok:
                bad.append(s.system)
    for name, want in (("ell6", 6), ("dim8_23568", 8)):
        s = claimed_integrals(name)[0]
        if jacobian_rank_at(s, sample_points(2 * catalog_lookup(name).dim, 3)) != want:
            bad.append(f"{name} rank")
    assert record_criterion(5, not bad, f"claimed brackets, identities and ranks; failures {bad}")


def test_criterion_6_realizations():
    bad = []
    for name in CATALOG_NAMES:
        sys = catalog_lookup(name)
        rep = verify_realization(sys.algebra, sys.realization)
        if not rep.ok:
            bad.append(name)
    engel = catalog_lookup("engel").realization
    for w in engel.omegas.values():
        for t in engel.thetas.values():
            if not poisson_bracket(w, t).is_zero():
                bad.append("engel theta")
    assert record_criterion(6, not bad, f"single-sign realizations, Engel thetas; failures {bad}")


def test_criterion_7_reduction():
    rng = random.Random(7)
    bad = 0
    done = 0
    while done < 100:
        cs = [Fraction(rng.randint(-50, 50), rng.randint(1, 9)) for _ in range(4)]
        if cs[2] * cs[3] == 0:
            continue
        red = reduce_system_constants("par6", cs)
        done += 1
        if not (red.kind == "Q1" and red.exact and red.a == cs[3] / 2 and red.b == cs[2]):
            bad += 1
    reeb_bad = 0
    for _ in range(20):
        a, b, c = (Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(3))
        rep = reeb_check(a, b, c)
        if not (rep.ok and rep.divergence == "0"):
            reeb_bad += 1
    assert record_criterion(7, bad == 0 and reeb_bad == 0,
                            f"100 par6 reductions ({bad} wrong), divergence zero and contact "
                            f"form closes for 20 random laws ({reeb_bad} wrong)")


def _dynamics_checks():
    out = {}
    c = 1.5
    T = 2 * math.pi / c
    tr = integrate(c, State(0, 0, 0, 0), 10 * T)
    s = tr.final
    out["circle"] = max(abs(s.x), abs(s.y), abs(s.z - 20 * math.pi))
    ell = normalize_Q(parse_poly("x1^2 + x2^2", 2, 0))
    tr = integrate(ell, State(0, 1, 0, 0), 1000.0)
    out["drift"] = invariant_monitor(ell, tr)
    q1 = normalize_Q(parse_poly("10 x1^2 - 1/10 x2", 2, 0))
    zs = poincare_section(q1, State(0, 0, 0, 0), SectionSpec("z", 0, "increasing", 300))
    out["z_ok"] = all(q1.curvature()(p.x, p.y) > 0 for p in zs.points)
    xs = poincare_section(q1, State(0, 0, 0, 0), SectionSpec("x", 0, "increasing", 300))
    out["x_ok"] = all(math.cos(p.z) > 0 for p in xs.points)
    return out


def test_criterion_8_dynamics():
    r = _dynamics_checks()
    ok = r["circle"] < 1e-9 and r["drift"] < 1e-8 and r["z_ok"] and r["x_ok"]
    assert record_criterion(8, ok, f"circle error {r['circle']:.2e}, invariant drift "
                                   f"{r['drift']:.2e}, section signs z {r['z_ok']} x {r['x_ok']}")


@pytest.mark.long
def test_criterion_8_long_section_point_count():
    q1 = normalize_Q(parse_poly("10 x1^2 - 1/10 x2", 2, 0))
    res = poincare_section(q1, State(0, 0, 0, 0), SectionSpec("z", 0, "increasing", 100_000),
                           IntegratorConfig())
    ok = len(res.points) == 100_000 and not res.truncated
    assert record_criterion(8, ok, f"Q1(10,-0.1) z-section: {len(res.points)} points")
