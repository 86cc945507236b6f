"""Carnot algebras, coordinate realizations and the catalog of rank-2 SR systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .exactpoly import Poly, parse_poly, poisson_bracket
from .linalg import nullspace_rational, rank_rational


class AlgebraInputError(ValueError):
    """Structurally malformed algebra data (bad indices, bad grading)."""


class CatalogError(KeyError):
    pass


class ParameterError(ValueError):
    pass


class RealizationError(ValueError):
    """No single sign makes the coordinate forms satisfy the structure equations."""


@dataclass(frozen=True)
class CarnotAlgebra:
    """Graded nilpotent Lie algebra given by structure constants.

    ``brackets`` maps ``(i, j)`` with ``i < j`` (1-based) to ``{k: c}`` meaning
    ``[e_i, e_j] = sum_k c e_k``.
    """

    name: str
    dim: int
    grading: tuple[int, ...]
    brackets: dict = field(hash=False)

    @classmethod
    def from_triples(cls, name, dim, grading, triples):
        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        for i, j, k, c in triples:
            if not (1 <= i <= dim and 1 <= j <= dim and 1 <= k <= dim):
                raise AlgebraInputError(f"index out of range in bracket ({i},{j},{k})")
            if i >= j:
                raise AlgebraInputError(f"bracket ({i},{j}) must have i < j")
            c = Fraction(c)
            if not c:
                continue
            row = table.setdefault((i, j), {})
            row[k] = row.get(k, 0) + c
        grading = tuple(int(g) for g in grading)
        if any(g <= 0 for g in grading):
            raise AlgebraInputError("layer dimensions must be positive")
        return cls(name, dim, grading, table)

    def layer(self, i: int) -> int:
        """1-based layer index of basis vector ``e_i``."""
        acc = 0
        for s, g in enumerate(self.grading, start=1):
            acc += g
            if i <= acc:
                return s
        raise AlgebraInputError(f"basis index {i} beyond grading {self.grading}")

    def weights(self) -> list[int]:
        return [self.layer(i) for i in range(1, self.dim + 1)]

    def bracket_basis(self, i: int, j: int) -> dict[int, Fraction]:
        if i == j:
            return {}
        if i < j:
            return dict(self.brackets.get((i, j), {}))
        return {k: -c for k, c in self.brackets.get((j, i), {}).items()}

    def bracket(self, u: dict, v: dict) -> dict:
        out: dict[int, Fraction] = {}
        for i, a in u.items():
            for j, b in v.items():
                for k, c in self.bracket_basis(i, j).items():
                    out[k] = out.get(k, 0) + a * b * c
        return {k: c for k, c in out.items() if c}

    def triples(self):
        for (i, j), row in sorted(self.brackets.items()):
            for k, c in sorted(row.items()):
                yield i, j, k, c


@dataclass
class ValidationReport:
    name: str
    checks: dict[str, bool]
    failures: list[str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def validate_algebra(alg: CarnotAlgebra) -> ValidationReport:
    D = alg.dim
    if sum(alg.grading) != D:
        raise AlgebraInputError(f"grading {alg.grading} does not sum to dim {D}")
    for (i, j), row in alg.brackets.items():
        if not (1 <= i < j <= D) or any(not 1 <= k <= D for k in row):
            raise AlgebraInputError(f"malformed bracket entry ({i},{j})")
    failures = []

    # i<j storage makes antisymmetry automatic; [e_i,e_i] = 0 is implied too
    antisym = all(i < j for i, j in alg.brackets)

    jacobi = True
    e = lambda i: {i: Fraction(1)}  # noqa: E731
    for i, j, k in itertools.combinations(range(1, D + 1), 3):
        t1 = alg.bracket(e(i), alg.bracket(e(j), e(k)))
        t2 = alg.bracket(e(j), alg.bracket(e(k), e(i)))
        t3 = alg.bracket(e(k), alg.bracket(e(i), e(j)))
        s = {}
        for t in (t1, t2, t3):
            for key, c in t.items():
                s[key] = s.get(key, 0) + c
        if any(s.values()):
            jacobi = False
            failures.append(f"Jacobi fails on (e{i}, e{j}, e{k})")

    graded = True
    for i, j, k, c in alg.triples():
        if alg.layer(i) + alg.layer(j) != alg.layer(k):
            graded = False
            failures.append(f"[e{i},e{j}] has e{k} component outside layer "
                            f"{alg.layer(i) + alg.layer(j)}")

    generates = growth_vector(alg)[-1] == D
    if not generates:
        failures.append("first layer does not bracket-generate the algebra")
    checks = {"antisymmetry": antisym, "jacobi": jacobi, "grading": graded,
              "bracket_generating": generates}
    return ValidationReport(alg.name, checks, failures)


def growth_vector(alg: CarnotAlgebra) -> list[int]:
    """Dimensions of the weak derived flag generated by the first layer."""
    D = alg.dim
    g1 = [{i: Fraction(1)} for i in range(1, alg.grading[0] + 1)]

    def dim_span(vectors):
        return rank_rational([[v.get(k, 0) for k in range(1, D + 1)] for v in vectors])

    span = list(g1)
    current = list(g1)
    dims = [dim_span(span)]
    while True:
        new = [alg.bracket(u, w) for u in g1 for w in current]
        new = [v for v in new if v]
        span_next = span + new
        d = dim_span(span_next)
        if d == dims[-1]:
            break
        dims.append(d)
        span, current = span_next, new
    return dims


# coordinate realizations


@dataclass
class CoordinateRealization:
    omegas: dict[int, Poly]
    thetas: dict[int, Poly] = field(default_factory=dict)
    sign: int = 1
    derived: tuple[int, ...] = ()


@dataclass
class RealizationReport:
    sign: int | None
    omega_pairs_checked: int
    theta_pairs_checked: int
    failures: list[str]
    base_point_ok: bool

    @property
    def ok(self) -> bool:
        return self.sign is not None and not self.failures and self.base_point_ok


def _omega_combination(omegas, coeffs: dict[int, Fraction], nvars: int) -> Poly | None:
    out = Poly.zero(nvars, nvars)
    for k, c in coeffs.items():
        if k not in omegas:
            return None
        out = out + omegas[k].scale(c)
    return out


def complete_realization(alg: CarnotAlgebra, omegas: dict[int, Poly], sign: int
                         ) -> tuple[dict[int, Poly], tuple[int, ...]]:
    """Fill in missing omegas from brackets of known ones.

    ``omega_k = sign * {omega_i, omega_j} / c`` whenever ``[e_i, e_j] = c e_k``
    is a single-term relation with ``omega_i, omega_j`` already known.
    """
    omegas = dict(omegas)
    derived = []
    progress = True
    while progress and len(omegas) < alg.dim:
        progress = False
        for i, j, k, c in alg.triples():
            if k in omegas or i not in omegas or j not in omegas:
                continue
            if len(alg.brackets[(i, j)]) != 1:
                continue
            br = poisson_bracket(omegas[i], omegas[j])
            omegas[k] = br.scale(Fraction(sign) / c)
            derived.append(k)
            progress = True
    return omegas, tuple(derived)


def verify_realization(alg: CarnotAlgebra, real: CoordinateRealization) -> RealizationReport:
    """Find the global sign making ``{w_i, w_j} = sign * c_ij^k w_k`` hold identically.

    Pairs whose right-hand side involves an absent omega are skipped; every
    provided theta must commute with every provided omega.
    """
    om = real.omegas
    D = alg.dim
    n = next(iter(om.values())).num_base
    candidates = {1, -1}
    failing: dict[int, str] = {}
    checked = 0
    brackets = {}
    for i, j in itertools.combinations(sorted(om), 2):
        rhs = _omega_combination(om, alg.bracket_basis(i, j), n)
        if rhs is None:
            continue
        checked += 1
        lhs = poisson_bracket(om[i], om[j])
        brackets[(i, j)] = (lhs, rhs)
        for s in list(candidates):
            if lhs != rhs.scale(s):
                candidates.discard(s)
                failing.setdefault(s, f"{{w{i}, w{j}}} != {s:+d} * sum c_{i}{j}^k w_k")
    failures = []
    sign = None
    if len(candidates) == 2:
        # all checked brackets vanish identically; the sign is not determined
        sign = real.sign
    elif candidates:
        sign = candidates.pop()
    else:
        failures.append("no consistent sign: " + "; ".join(sorted(failing.values())))
    theta_checked = 0
    for i, w in sorted(om.items()):
        for j, t in sorted(real.thetas.items()):
            theta_checked += 1
            if not poisson_bracket(w, t).is_zero():
                failures.append(f"{{w{i}, theta{j}}} != 0")
    origin = {("x", m): 0 for m in range(1, n + 1)}
    base_ok = all(w.subs(origin) == Poly.p(i, n, n) for i, w in om.items() if i <= D)
    return RealizationReport(sign, checked, theta_checked, failures, base_ok)


def solve_right_invariant(alg: CarnotAlgebra, real: CoordinateRealization, i: int) -> Poly:
    """Right-invariant linear form ``theta_i`` with ``theta_i(o) = p_i``.

    Solves ``{omega_1, theta} = {omega_2, theta} = 0`` for
    ``theta = sum_j f_j(x) p_j`` with ``f_j`` weighted-homogeneous of weight
    ``w_j - w_i`` (first-layer omegas generate, so this suffices).
    """
    D = alg.dim
    w = alg.weights()
    unknowns = []  # (j, x-exponent)
    for j in range(1, D + 1):
        target = w[j - 1] - w[i - 1]
        if target < 0:
            continue
        for mono in _weighted_monomials(w, target):
            unknowns.append((j, mono))
    index = {u: n for n, u in enumerate(unknowns)}

    def basis_poly(j, mono):
        e = tuple(mono) + tuple(1 if m == j else 0 for m in range(1, D + 1))
        return Poly(D, D, {e: 1})

    rows: dict[tuple, dict[int, Fraction]] = {}
    gens = [k for k in range(1, alg.grading[0] + 1)]
    for g in gens:
        for n, (j, mono) in enumerate(unknowns):
            br = poisson_bracket(real.omegas[g], basis_poly(j, mono))
            for e, c in br.items():
                rows.setdefault((g, e), {})[n] = c
    eqs = [row for row in rows.values()]
    # normalization f_ij(0) = delta_ij: f_jj constant term is the unknown (j, 0)
    zero = (0,) * D
    ncols = len(unknowns) + 1
    mat = [[r.get(c, Fraction(0)) for c in range(len(unknowns))] + [Fraction(0)] for r in eqs]
    for j in range(1, D + 1):
        if (j, zero) in index:
            row = [Fraction(0)] * ncols
            row[index[(j, zero)]] = Fraction(1)
            row[-1] = Fraction(-1 if j == i else 0)
            mat.append(row)
    ns = nullspace_rational(mat, ncols)
    sols = [v for v in ns if v[-1] != 0]
    if len(ns) != 1 or not sols:
        raise RealizationError(f"right-invariant form theta{i} not uniquely determined "
                               f"(nullity {len(ns)})")
    v = sols[0]
    v = [c / v[-1] for c in v]
    theta = Poly.zero(D, D)
    for n, (j, mono) in enumerate(unknowns):
        if v[n]:
            theta = theta + basis_poly(j, mono).scale(v[n])
    return theta


def _weighted_monomials(weights, target):
    D = len(weights)
    out = []

    def rec(k, remaining, acc):
        if k == D:
            if remaining == 0:
                out.append(tuple(acc))
            return
        wk = weights[k]
        for n in range(remaining // wk + 1):
            acc.append(n)
            rec(k + 1, remaining - n * wk, acc)
            acc.pop()

    rec(0, target, [])
    return out


# SR systems


@dataclass(frozen=True)
class SRSystem:
    """Left-invariant rank-2 SR structure with ``2H = xi_1^2 + xi_2^2``."""

    name: str
    algebra: CarnotAlgebra
    frame: tuple[Poly, Poly]
    realization: CoordinateRealization | None = field(default=None, hash=False, compare=False)
    params: tuple = ()

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def hamiltonian2(self) -> Poly:
        a, b = self.frame
        return a * a + b * b

    @property
    def hamiltonian(self) -> Poly:
        return self.hamiltonian2.scale(Fraction(1, 2))

    @property
    def obstruct_ready(self) -> bool:
        h = self.hamiltonian2
        return not any(h.depends_on(("x", j)) for j in range(3, self.dim + 1))

    @property
    def noether_momenta(self) -> tuple[int, ...]:
        return tuple(range(3, self.dim + 1))


def _alg(name, dim, grading, triples):
    return CarnotAlgebra.from_triples(name, dim, grading, triples)


_CARTAN = [(1, 2, 3, 1), (1, 3, 4, 1), (2, 3, 5, 1)]

ALGEBRAS = {
    "heis3": lambda: _alg("heis3", 3, (2, 1), [(1, 2, 3, 1)]),
    "engel": lambda: _alg("engel", 4, (2, 1, 1), [(1, 2, 3, 1), (1, 3, 4, 1)]),
    "cartan5": lambda: _alg("cartan5", 5, (2, 1, 2), _CARTAN),
    "ell6": lambda: _alg("ell6", 6, (2, 1, 2, 1), _CARTAN + [(1, 4, 6, 1), (2, 5, 6, 1)]),
    "par6": lambda: _alg("par6", 6, (2, 1, 2, 1), _CARTAN + [(1, 4, 6, 1)]),
    "hyp6": lambda: _alg("hyp6", 6, (2, 1, 2, 1), _CARTAN + [(1, 5, 6, 1), (2, 4, 6, 1)]),
    "dim7": lambda: _alg("dim7", 7, (2, 1, 2, 2), _CARTAN + [
        (1, 4, 6, 1), (2, 5, 6, -1), (1, 5, 7, 1), (2, 4, 7, 1)]),
    "dim8_23568": lambda: _alg("dim8_23568", 8, (2, 1, 2, 1, 2), _CARTAN + [
        (1, 4, 6, 1), (2, 5, 6, 1), (1, 6, 7, 1), (2, 6, 8, 1),
        (3, 4, 8, -1), (3, 5, 7, 1)]),
    "dim8_2358": lambda: _alg("dim8_2358", 8, (2, 1, 2, 3), _CARTAN + [
        (1, 4, 6, 1), (1, 5, 7, 1), (2, 4, 7, 1), (2, 5, 8, 1)]),
}

# omega_1, omega_2 are the frame fields of 2H; the rest are filled in by bracket completion
_OMEGAS = {
    "heis3": {1: "p1 + x2 p3", 2: "p2", 3: "p3"},
    "engel": {1: "p1 + x2 p3 + x3 p4", 2: "p2", 3: "p3", 4: "p4"},
    "cartan5": {1: "p1 - 1/2 x2 p3 - x1 x2 p4", 2: "p2 + 1/2 x1 p3 + x1 x2 p5"},
    "ell6": {
        1: "p1 - 1/2 x2 p3 - x1 x2 p4 - 1/2 x1^2 x2 p6",
        2: "p2 + 1/2 x1 p3 + x1 x2 p5 + 1/2 x1 x2^2 p6",
        3: "p3 + x1 p4 + x2 p5 + 1/2 (x1^2 + x2^2) p6",
        4: "p4 + x1 p6", 5: "p5 + x2 p6", 6: "p6"},
    "par6": {1: "p1 - 1/2 x2 p3 - x1 x2 p4 - 1/2 x1^2 x2 p6",
             2: "p2 + 1/2 x1 p3 + x1 x2 p5"},
    "hyp6": {1: "p1 - 1/2 x2 p3 - x1 x2 p4 - 1/4 x1 x2^2 p6",
             2: "p2 + 1/2 x1 p3 + x1 x2 p5 + 1/4 x1^2 x2 p6"},
    "dim7": {1: "p1 - 1/2 x2 p3 - x1 x2 p4 - 1/2 x1^2 x2 p6 - 1/4 x1 x2^2 p7",
             2: "p2 + 1/2 x1 p3 + x1 x2 p5 - 1/2 x1 x2^2 p6 + 1/4 x1^2 x2 p7"},
    "dim8_2358": {
        1: "p1 - 1/2 x2 p3 - 1/2 (x1^2 + x2^2) p5 - 1/4 x1 x2^2 p7 - 1/6 x2^3 p8",
        2: "p2 + 1/2 x1 p3 + 1/2 (x1^2 + x2^2) p4 + 1/6 x1^3 p6 + 1/4 x1^2 x2 p7"},
    "dim8_23568": {
        1: "p1 - 1/2 x2 p3 - x1 x2 p4 - 1/2 x1^2 x2 p6 - 1/5 (x1^2 + 2 x2^2) x3 p7"
           " + 1/5 x1 x2 x3 p8",
        2: "p2 + 1/2 x1 p3 + x1 x2 p5 + 1/2 x1 x2^2 p6 + 1/5 x1 x2 x3 p7"
           " - 1/5 (2 x1^2 + x2^2) x3 p8",
        3: "p3 + x1 p4 + x2 p5 + 1/2 (x1^2 + x2^2) p6"
           " + (1/10 (x1^2 + x2^2) x1 + x2 x3) p7 + (1/10 (x1^2 + x2^2) x2 - x1 x3) p8",
        4: "p4 + x1 p6 + 1/2 x1^2 p7 + (1/2 x1 x2 - x3) p8",
        5: "p5 + x2 p6 + (1/2 x1 x2 + x3) p7 + 1/2 x2^2 p8",
        6: "p6 + x1 p7 + x2 p8", 7: "p7", 8: "p8"},
}

_THETAS = {
    "heis3": {1: "p1", 2: "p2 + x1 p3", 3: "p3"},
    "engel": {1: "-p1", 2: "p2 + x1 p3 + 1/2 x1^2 p4", 3: "p3 + x1 p4", 4: "p4"},
    "cartan5": {1: "p1 + 1/2 x2 p3 + (x3 - 1/2 x1 x2) p4 + 1/2 x2^2 p5",
                2: "p2 - 1/2 x1 p3 - 1/2 x1^2 p4 + (x3 + 1/2 x1 x2) p5",
                3: "p3", 4: "p4", 5: "p5"},
    "dim8_23568": {i: f"p{i}" for i in range(4, 9)},
}

_SIGNS = {"heis3": 1, "engel": 1}


def _build_realization(name: str, D: int) -> CoordinateRealization:
    alg = ALGEBRAS[name]()
    omegas = {i: parse_poly(s, D, D) for i, s in _OMEGAS[name].items()}
    sign = _SIGNS.get(name, -1)
    omegas, derived = complete_realization(alg, omegas, sign)
    if name in _THETAS:
        thetas = {i: parse_poly(s, D, D) for i, s in _THETAS[name].items()}
    else:
        # Noether momenta of the obstruct-ready systems
        thetas = {i: Poly.p(i, D, D) for i in range(3, D + 1)}
    return CoordinateRealization(omegas, thetas, sign, derived)


CATALOG_NAMES = ("heis3", "engel", "cartan5", "ell6", "par6", "hyp6", "gen6",
                 "dim7", "dim8_23568", "dim8_2358")


def catalog_lookup(name: str, a=None, b=None, base: str = "ell6") -> SRSystem:
    """Catalog system by name; ``gen6`` takes ``2H = w1^2 + (a w1 + b w2)^2``.

    ``base`` selects the elliptic (default) or hyperbolic algebra for ``gen6``.
    """
    if name == "gen6":
        a = Fraction(0 if a is None else a)
        b = Fraction(1 if b is None else b)
        if b == 0:
            raise ParameterError("gen6 needs b != 0")
        if base not in ("ell6", "hyp6"):
            raise ParameterError("gen6 base must be 'ell6' or 'hyp6'")
        inner = catalog_lookup(base)
        w1, w2 = inner.frame
        frame = (w1, w1.scale(a) + w2.scale(b))
        return SRSystem("gen6", inner.algebra, frame, inner.realization, (a, b, base))
    if name not in ALGEBRAS:
        raise CatalogError(f"unknown system {name!r}; known: {', '.join(CATALOG_NAMES)}")
    alg = ALGEBRAS[name]()
    real = _build_realization(name, alg.dim)
    return SRSystem(name, alg, (real.omegas[1], real.omegas[2]), real)


# algebra text format


def parse_algebra_file(text: str, name: str = "user") -> tuple[CarnotAlgebra, SRSystem | None]:
    """Parse the ``dim / grading / bracket / omega / theta / hamiltonian2`` format.

    Returns the algebra and, when ``omega 1`` and ``omega 2`` are present, an
    SR system with frame ``(omega_1, omega_2)``.  A ``hamiltonian2`` line must
    then agree with ``omega_1^2 + omega_2^2``.
    """
    dim = None
    grading = None
    triples = []
    omega_src: dict[int, str] = {}
    theta_src: dict[int, str] = {}
    h2_src = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "dim":
                dim = int(rest)
            elif head == "grading":
                grading = tuple(int(t) for t in rest.split())
            elif head == "bracket":
                i, j, k, c = rest.split()
                triples.append((int(i), int(j), int(k), Fraction(c)))
            elif head in ("omega", "theta"):
                idx, _, expr = rest.partition("=")
                (omega_src if head == "omega" else theta_src)[int(idx)] = expr
            elif line.startswith("hamiltonian2"):
                h2_src = line.partition("=")[2]
            else:
                raise AlgebraInputError(f"line {lineno}: unknown directive {head!r}")
        except ValueError as exc:
            if isinstance(exc, AlgebraInputError):
                raise
            raise AlgebraInputError(f"line {lineno}: {exc}") from exc
    if dim is None or grading is None:
        raise AlgebraInputError("missing 'dim' or 'grading' line")
    alg = CarnotAlgebra.from_triples(name, dim, grading, triples)
    if sum(grading) != dim:
        raise AlgebraInputError(f"grading {grading} does not sum to dim {dim}")
    if 1 not in omega_src or 2 not in omega_src:
        return alg, None
    omegas = {i: parse_poly(s, dim, dim) for i, s in omega_src.items()}
    thetas = {i: parse_poly(s, dim, dim) for i, s in theta_src.items()}
    real = CoordinateRealization(omegas, thetas, 1)
    rep = verify_realization(alg, real)
    if rep.sign is not None:
        real.sign = rep.sign
    system = SRSystem(name, alg, (omegas[1], omegas[2]), real)
    if h2_src is not None and parse_poly(h2_src, dim, dim) != system.hamiltonian2:
        raise AlgebraInputError("hamiltonian2 differs from omega1^2 + omega2^2")
    return alg, system


def load_algebra_file(path, name: str | None = None):
    p = Path(path)
    return parse_algebra_file(p.read_text(encoding="utf-8"), name or p.stem)


def format_algebra(alg: CarnotAlgebra, real: CoordinateRealization | None = None) -> str:
    lines = [f"# {alg.name}", f"dim {alg.dim}", "grading " + " ".join(map(str, alg.grading))]
    for i, j, k, c in alg.triples():
        lines.append(f"bracket {i} {j} {k} {c}")
    if real is not None:
        for i, w in sorted(real.omegas.items()):
            lines.append(f"omega {i} = {w}")
        for i, t in sorted(real.thetas.items()):
            lines.append(f"theta {i} = {t}")
    return "\n".join(lines) + "\n"
