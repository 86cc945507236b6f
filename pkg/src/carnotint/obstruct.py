"""Nonexistence test for polynomial integrals of a given degree.

Candidate integrals are ``F = sum_tau a_tau(x1, x2) p^tau`` with ``|tau| = d``:
they commute with the Noether momenta ``p3..pD``, so the coefficients only
see the first two base coordinates.  Requiring ``{H, F} = 0`` gives a first
order linear PDE system for the ``a_tau``.  Differentiating it ``k`` times and
evaluating at the origin turns it into an integer matrix in the unknown jets
``a_{tau;sigma}``, ``|sigma| <= k + 1``.  The kernel dimension of that matrix
bounds the number of independent degree-``d`` integrals from above; when it
equals the number of integrals built from ``H`` and the momenta alone, no
other integral of degree ``d`` exists.
"""

from __future__ import annotations

import json
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field
from math import comb, factorial

from sympy import nextprime

from . import __version__
from .carnot import SRSystem, catalog_lookup
from .exactpoly import Poly, clear_denominators
from .sparserank import (SparseIntMatrix, check_prime, dedupe_rows, monic_row, primitive_row,
                         rank_exact, rank_mod_p)

NO_FINAL = "NoFinalIntegral"
INCONCLUSIVE = "Inconclusive"

AUTO_PRIME_SEED = 4201
AUTO_PRIME_ATTEMPTS = 8


class PreconditionError(ValueError):
    pass


class InternalConsistencyError(RuntimeError):
    pass


# counting


def trivial_count(D: int, d: int) -> int:
    """Number of independent products ``H^i * p3^a3 ... pD^aD`` of degree ``d``."""
    if D < 3 or d < 0:
        raise ValueError("need D >= 3 and d >= 0")
    return sum(comb(d - 2 * i + D - 3, D - 3) for i in range(d // 2 + 1))


def absent_lower_bound(D: int, d: int) -> int:
    """Unknowns that never occur in M: the values at the origin of the ``a_tau``
    whose ``tau`` uses only ``p3..pD``.  Their number is a guaranteed lower
    bound for the absent columns; ``trivial_count`` is not (the ``H``-type
    trivial integrals have jets that do occur).
    """
    return comb(d + D - 3, D - 3)


def num_equations(D: int, d: int, k: int) -> int:
    return comb(d + D, D - 1) * comb(k + 2, 2)


def num_unknowns(D: int, d: int, k: int) -> int:
    return comb(d + D - 1, D - 1) * comb(k + 3, 2)


def momentum_indices(D: int, d: int) -> list[tuple[int, ...]]:
    """Exponent vectors of degree ``d`` in ``D`` momenta, lexicographically descending."""
    out = []

    def rec(i, left, acc):
        if i == D - 1:
            out.append(tuple(acc + [left]))
            return
        for e in range(left, -1, -1):
            rec(i + 1, left - e, acc + [e])

    rec(0, d, [])
    return out


def jet_indices(order: int) -> list[tuple[int, int]]:
    """Two-variable multi-indices with ``|sigma| <= order``, by degree then lex."""
    return [(n - j, j) for n in range(order + 1) for j in range(n + 1)]


# PDE system


@dataclass
class PdeSystem:
    """Coefficients of ``{H, F}`` in the monomials ``p^mu``, ``|mu| = d + 1``.

    ``equations[i]`` maps ``(tau_index, deriv)`` to an x-polynomial stored as
    ``{(e1, e2): int}``; ``deriv`` is 0 for ``a_tau`` itself, 1 or 2 for its
    derivative in ``x1`` or ``x2``.
    """

    D: int
    d: int
    ansatz: list[tuple[int, ...]]
    equation_monomials: list[tuple[int, ...]]
    equations: list[dict[tuple[int, int], dict[tuple[int, int], int]]]
    scale: int = 1

    @property
    def num_equations(self) -> int:
        return len(self.equations)

    @property
    def num_unknown_functions(self) -> int:
        return len(self.ansatz)


def _hamiltonian_of(system_or_h) -> Poly:
    if isinstance(system_or_h, SRSystem):
        return system_or_h.hamiltonian2
    if isinstance(system_or_h, str):
        return catalog_lookup(system_or_h).hamiltonian2
    return system_or_h


def build_pde_system(H, d: int) -> PdeSystem:
    """Linear PDE system on the ``a_tau`` expressing ``{H, F} = 0``.

    ``H`` may be a Poly, an SRSystem (its ``2H`` is used) or a catalog name.
    It is rescaled to integer coefficients, which does not change the kernel.
    """
    H = _hamiltonian_of(H)
    D = H.num_base
    if H.num_mom != D:
        raise PreconditionError("Hamiltonian needs as many momenta as base coordinates")
    if D < 3:
        raise PreconditionError("need at least three coordinates")
    if d < 0:
        raise ValueError("degree must be non-negative")
    for j in range(3, D + 1):
        if H.depends_on(("x", j)):
            raise PreconditionError(f"Hamiltonian depends on x{j}; only x1, x2 are allowed")
    H, scale = clear_denominators(H)
    if not H.is_homogeneous_in_momenta(2):
        raise PreconditionError("Hamiltonian must be quadratic in the momenta")

    # terms of H as (x-exponent (e1, e2), p-exponent, integer coefficient)
    hterms = [((e[0], e[1]), e[D:], int(c)) for e, c in H.items()]
    ansatz = momentum_indices(D, d)
    eq_monos = momentum_indices(D, d + 1)
    eq_index = {mu: i for i, mu in enumerate(eq_monos)}
    equations: list[dict] = [defaultdict(lambda: defaultdict(int)) for _ in eq_monos]

    def add(mu, key, xexp, value):
        equations[eq_index[mu]][key][xexp] += value

    for t, tau in enumerate(ansatz):
        for (e1, e2), beta, c in hterms:
            for i, ei in ((0, e1), (1, e2)):
                # dH/dx_i * dF/dp_i
                if ei and tau[i]:
                    xexp = (e1 - 1, e2) if i == 0 else (e1, e2 - 1)
                    mu = list(tau)
                    mu[i] -= 1
                    mu = tuple(m + b for m, b in zip(mu, beta))
                    add(mu, (t, 0), xexp, c * ei * tau[i])
                # - dH/dp_i * dF/dx_i
                if beta[i]:
                    mu = list(beta)
                    mu[i] -= 1
                    mu = tuple(m + s for m, s in zip(mu, tau))
                    add(mu, (t, i + 1), (e1, e2), -c * beta[i])

    clean = []
    for eq in equations:
        row = {}
        for key, coef in eq.items():
            coef = {x: v for x, v in coef.items() if v}
            if coef:
                row[key] = coef
        clean.append(row)
    return PdeSystem(D, d, ansatz, eq_monos, clean, scale)


def prolong_evaluate(pde: PdeSystem, k: int) -> SparseIntMatrix:
    """Differentiate every equation by all ``x^sigma'``, ``|sigma'| <= k``, and evaluate at 0.

    Column ``t * len(jets) + j`` holds the jet ``a_{tau_t; sigma_j}`` with
    ``sigma_j`` running over :func:`jet_indices` of order ``k + 1``.
    """
    if k < 0:
        raise ValueError("prolongation order must be non-negative")
    jets = jet_indices(k + 1)
    jpos = {s: j for j, s in enumerate(jets)}
    nj = len(jets)
    falling = [[factorial(n) // factorial(n - b) if b <= n else 0 for b in range(k + 2)]
               for n in range(k + 2)]
    rows = []
    for eq in pde.equations:
        for s1, s2 in jet_indices(k):
            row: dict[int, int] = {}
            for (t, deriv), coef in eq.items():
                base = t * nj
                for (b1, b2), v in coef.items():
                    if b1 > s1 or b2 > s2:
                        continue
                    j1, j2 = s1 - b1, s2 - b2
                    if deriv == 1:
                        j1 += 1
                    elif deriv == 2:
                        j2 += 1
                    col = base + jpos[(j1, j2)]
                    row[col] = row.get(col, 0) + v * falling[s1][b1] * falling[s2][b2]
            rows.append({c: v for c, v in row.items() if v})
    return SparseIntMatrix(len(rows), len(pde.ansatz) * nj, rows)


def jet_vector(F: Poly, d: int, k: int) -> list:
    """Jets at the origin of a degree-``d`` function ``F`` in the column order of M."""
    D = F.num_base
    jets = jet_indices(k + 1)
    coeffs = defaultdict(dict)
    for e, c in F.items():
        if any(e[2:D]):
            raise PreconditionError("function depends on base coordinates beyond x1, x2")
        tau = e[D:]
        if sum(tau) != d:
            raise PreconditionError("function is not homogeneous of the given degree")
        coeffs[tau][(e[0], e[1])] = c
    out = []
    for tau in momentum_indices(D, d):
        a = coeffs.get(tau, {})
        for s in jets:
            c = a.get(s, 0)
            out.append(c * factorial(s[0]) * factorial(s[1]))
    return out


# reduction


@dataclass
class Reduction:
    matrix: SparseIntMatrix
    v_spfl: int
    v_mon: int
    v_bimon: int
    rows_after_dedupe: int
    modulus: int | None = None

    @property
    def v_red(self) -> int:
        return self.matrix.num_cols


def reduce_system(M: SparseIntMatrix, modulus: int | None = None,
                  min_absent: int | None = None) -> Reduction:
    """Strip the easy parts of ``M`` while preserving its nullity.

    Removes proportional rows, counts unknowns that appear nowhere, and
    repeatedly eliminates unknowns through rows with one or two entries.  With
    ``modulus`` every decision is taken in GF(p).  If ``min_absent`` is given,
    the count of absent unknowns is checked against it (see
    :func:`absent_lower_bound`).
    """
    if modulus is not None:
        check_prime(modulus)
    p = modulus
    ded = dedupe_rows(M, p)
    rows: dict[int, dict[int, int]] = {i: dict(r) for i, r in enumerate(ded.rows)}
    col_rows: dict[int, set[int]] = defaultdict(set)
    for i, r in rows.items():
        for c in r:
            col_rows[c].add(i)
    present = set(col_rows)
    v_spfl = M.num_cols - len(present)
    if min_absent is not None and v_spfl < min_absent:
        raise InternalConsistencyError(f"only {v_spfl} absent unknowns, expected >= {min_absent}")

    norm = (lambda r: primitive_row(r)) if p is None else (lambda r: monic_row(r, p))
    eliminated: set[int] = set()
    v_mon = v_bimon = 0
    queue = [i for i, r in rows.items() if len(r) <= 2]

    def set_row(i, new):
        old = rows[i]
        for c in old:
            if c not in new:
                col_rows[c].discard(i)
        for c in new:
            if c not in old:
                col_rows[c].add(i)
        if new:
            rows[i] = new
            if len(new) <= 2:
                queue.append(i)
        else:
            del rows[i]

    while queue:
        i = queue.pop()
        row = rows.get(i)
        if row is None or len(row) > 2:
            continue
        if len(row) == 1:
            (c, _), = row.items()
            set_row(i, {})
            for t in list(col_rows[c]):
                new = dict(rows[t])
                del new[c]
                set_row(t, norm(new) if new else new)
            eliminated.add(c)
            v_mon += 1
            continue
        (a, va), (b, vb) = row.items()
        # drop the column touching fewer rows
        if len(col_rows[a]) < len(col_rows[b]):
            (a, va), (b, vb) = (b, vb), (a, va)
        set_row(i, {})
        for t in list(col_rows[b]):
            r = rows[t]
            rb = r[b]
            if p is None:
                new = {c: vb * v for c, v in r.items() if c != b}
                new[a] = new.get(a, 0) - rb * va
            else:
                f = rb * pow(vb, -1, p) % p
                new = {c: v for c, v in r.items() if c != b}
                new[a] = (new.get(a, 0) - f * va) % p
            if not new[a]:
                del new[a]
            set_row(t, norm(new) if new else new)
        eliminated.add(b)
        v_bimon += 1

    keep = [c for c in range(M.num_cols) if c in present and c not in eliminated]
    cmap = {c: j for j, c in enumerate(keep)}
    out = [{cmap[c]: v for c, v in r.items()} for _, r in sorted(rows.items())]
    return Reduction(SparseIntMatrix(len(out), len(keep), out), v_spfl, v_mon, v_bimon,
                     ded.num_rows, p)


def rank_and_delta(red: Reduction, certify: bool = True) -> tuple[int, int]:
    """Rank of the reduced matrix and the resulting kernel-dimension bound."""
    if red.modulus is None:
        rank = rank_exact(red.matrix) if certify else rank_exact(red.matrix, certify_prime=None)
    else:
        rank = rank_mod_p(red.matrix, red.modulus)
    return rank, red.v_red + red.v_spfl - rank


def direct_delta(M: SparseIntMatrix, modulus: int | None = None) -> int:
    """Nullity of ``M`` without any reduction step (small instances only)."""
    rank = rank_exact(M, certify_prime=None) if modulus is None else rank_mod_p(M, modulus)
    return M.num_cols - rank


# verdict


@dataclass
class ObstructionReport:
    system: str
    D: int
    degree: int
    prolongations: int
    num_equations: int
    num_unknowns: int
    v_spfl: int
    v_mon: int
    v_bimon: int
    v_red: int
    rank_red: int
    delta: int
    lambda0: int
    modulus: int | None
    verdict: str
    elapsed_s: float
    reduced_rows: int = 0
    attempts: list = field(default_factory=list)
    tool_version: str = __version__

    @property
    def gap(self) -> int:
        return self.delta - self.lambda0

    @property
    def no_final(self) -> bool:
        return self.verdict == NO_FINAL

    def to_dict(self) -> dict:
        keys = ("system", "D", "degree", "prolongations", "num_equations", "num_unknowns",
                "v_spfl", "v_mon", "v_bimon", "v_red", "rank_red", "delta", "lambda0",
                "modulus", "verdict", "elapsed_s", "tool_version")
        return {k: getattr(self, k) for k in keys}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        field_ = "Q" if self.modulus is None else f"GF({self.modulus})"
        head = (f"{self.system} d={self.degree} k={self.prolongations} over {field_}: "
                f"M {self.num_equations}x{self.num_unknowns}, "
                f"M_red {self.reduced_rows}x{self.v_red}, "
                f"spfl={self.v_spfl} mon={self.v_mon} bimon={self.v_bimon} "
                f"rank={self.rank_red} delta={self.delta} lambda0={self.lambda0}")
        if self.no_final:
            return head + f" -> {NO_FINAL}({self.degree})"
        return head + f" -> {INCONCLUSIVE} (gap {self.gap})"


def auto_primes(seed: int = AUTO_PRIME_SEED, count: int = AUTO_PRIME_ATTEMPTS) -> list[int]:
    """Fixed increasing sequence of pseudo-random primes in ``[31, 2**31)``."""
    rng = random.Random(seed)
    starts = sorted(rng.randrange(31, 2**31 - 2**20) for _ in range(count))
    out = []
    for s in starts:
        q = nextprime(s - 1)
        if out and q <= out[-1]:
            q = nextprime(out[-1])
        out.append(q)
    return out


def _run_once(system: SRSystem, d: int, k: int, modulus: int | None, certify: bool,
              M: SparseIntMatrix) -> ObstructionReport:
    t0 = time.perf_counter()
    D = system.dim
    lam = trivial_count(D, d)
    red = reduce_system(M, modulus, min_absent=absent_lower_bound(D, d))
    rank, delta = rank_and_delta(red, certify=certify)
    if delta < lam:
        raise InternalConsistencyError(
            f"{system.name} d={d}: kernel bound {delta} below trivial count {lam}")
    return ObstructionReport(
        system=system.name, D=D, degree=d, prolongations=k,
        num_equations=M.num_rows, num_unknowns=M.num_cols,
        v_spfl=red.v_spfl, v_mon=red.v_mon, v_bimon=red.v_bimon, v_red=red.v_red,
        rank_red=rank, delta=delta, lambda0=lam, modulus=modulus,
        verdict=NO_FINAL if delta == lam else INCONCLUSIVE,
        elapsed_s=time.perf_counter() - t0, reduced_rows=red.matrix.num_rows)


def decide(system, d: int, mode="exact", k: int | None = None,
           certify: bool = True) -> ObstructionReport:
    """Run the whole pipeline for degree ``d``.

    ``mode`` is ``"exact"``, a prime (or ``("mod", p)``), or ``"auto"`` for
    the built-in prime sequence, which stops at the first NO verdict.
    """
    if isinstance(system, str):
        system = catalog_lookup(system)
    if not system.obstruct_ready:
        raise PreconditionError(f"{system.name}: Hamiltonian depends on x3..xD")
    if k is None:
        k = d + 1
    t0 = time.perf_counter()
    M = prolong_evaluate(build_pde_system(system, d), k)
    build_s = time.perf_counter() - t0
    if isinstance(mode, tuple):
        mode = mode[1]
    if mode == "exact":
        rep = _run_once(system, d, k, None, certify, M)
    elif mode == "auto":
        attempts = []
        for q in auto_primes():
            rep = _run_once(system, d, k, q, certify, M)
            attempts.append((q, rep.delta))
            if rep.no_final:
                break
        rep.attempts = attempts
    else:
        rep = _run_once(system, d, k, int(mode), certify, M)
    rep.elapsed_s += build_s
    return rep


@dataclass(frozen=True)
class DerivedVerdict:
    system: str
    established_degree: int
    degrees: tuple[int, ...]
    multiplier: str

    def __str__(self):
        return (f"{self.system}: no final integral of degree {self.established_degree} "
                f"excludes degrees {list(self.degrees)} (multiply by {self.multiplier})")


def degree_reduction_note(d_low: int, d_high: int, report: ObstructionReport) -> DerivedVerdict:
    """A final integral ``F`` of degree ``d_low`` would give ``F * pD^(d_high - d_low)``.

    That product commutes with ``H`` and is not trivial, so a NO verdict at
    ``d_high`` covers every lower degree.
    """
    if not report.no_final or report.degree != d_high:
        raise PreconditionError(f"no established {NO_FINAL} verdict at degree {d_high}")
    if report.D < 3:
        raise PreconditionError("no momentum of a cyclic coordinate available")
    if not 0 <= d_low <= d_high:
        raise ValueError("need 0 <= d_low <= d_high")
    n = d_high - d_low
    mult = "1" if n == 0 else f"p{report.D}^{n}"
    return DerivedVerdict(report.system, d_high, tuple(range(d_low, d_high + 1)), mult)
