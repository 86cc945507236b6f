"""Small dense linear algebra over the rationals (row reduction with Fractions)."""

from __future__ import annotations

from fractions import Fraction


def rref(rows, ncols: int | None = None):
    """Reduced row echelon form; returns ``(matrix, pivot_columns)``."""
    m = [[Fraction(v) for v in r] for r in rows]
    if ncols is None:
        ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank_rational(rows) -> int:
    rows = [r for r in rows if any(r)]
    if not rows:
        return 0
    return len(rref(rows)[1])


def nullspace_rational(rows, ncols: int) -> list[list[Fraction]]:
    """Basis of ``{v : rows . v = 0}``, one vector per free column."""
    rows = [r for r in rows if any(r)]
    red, pivots = rref(rows, ncols) if rows else ([], [])
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis
