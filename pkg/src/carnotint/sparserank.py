"""Sparse integer matrices and their rank over GF(p) and over the rationals.

Both rank routines split the matrix into connected row/column blocks first
(rank is additive over them) and then run Gaussian elimination per block,
choosing pivots by a minimal-fill rule: the shortest remaining row, and
within it the column with the fewest entries, ties broken by index.

Over GF(p) the elimination switches to a dense numpy kernel once the active
block fills in.  Over the rationals rows stay integral: eliminating with
pivot row ``P`` maps ``r -> P[c] r - r[c] P`` followed by division by the
row content.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from typing import Iterable

import numpy as np
from sympy import isprime

# largest prime below 2**31; products of residues fit in int64
CERTIFY_PRIME = 2147483629
_DENSE_INT64_LIMIT = 2**31


class MatrixInputError(ValueError):
    pass


class SparseIntMatrix:
    """``num_rows x num_cols`` integer matrix stored as sorted ``(col, value)`` rows."""

    __slots__ = ("num_rows", "num_cols", "rows")

    def __init__(self, num_rows: int, num_cols: int, rows: Iterable):
        rows = list(rows)
        if len(rows) != num_rows:
            raise MatrixInputError(f"expected {num_rows} rows, got {len(rows)}")
        clean = []
        for r in rows:
            items = r.items() if isinstance(r, dict) else r
            entries = sorted((int(c), int(v)) for c, v in items if v)
            for a, b in zip(entries, entries[1:]):
                if a[0] == b[0]:
                    raise MatrixInputError(f"duplicate column {a[0]} in a row")
            if entries and not (0 <= entries[0][0] and entries[-1][0] < num_cols):
                raise MatrixInputError("column index out of range")
            clean.append(tuple(entries))
        self.num_rows = num_rows
        self.num_cols = num_cols
        self.rows = clean

    @classmethod
    def from_dense(cls, dense) -> "SparseIntMatrix":
        dense = [list(r) for r in dense]
        ncols = len(dense[0]) if dense else 0
        return cls(len(dense), ncols, [{c: v for c, v in enumerate(r) if v} for r in dense])

    @classmethod
    def from_triplets(cls, text: str, num_rows: int | None = None, num_cols: int | None = None):
        """Parse ``i j value`` lines (0-based indices)."""
        acc: dict[int, dict[int, int]] = defaultdict(dict)
        mr = mc = -1
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i, j, v = line.split()
            i, j, v = int(i), int(j), int(v)
            acc[i][j] = acc[i].get(j, 0) + v
            mr, mc = max(mr, i), max(mc, j)
        nr = mr + 1 if num_rows is None else num_rows
        nc = mc + 1 if num_cols is None else num_cols
        return cls(nr, nc, [acc.get(i, {}) for i in range(nr)])

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.num_cols for _ in range(self.num_rows)]
        for i, r in enumerate(self.rows):
            for c, v in r:
                out[i][c] = v
        return out

    def to_triplets(self) -> str:
        return "".join(f"{i} {c} {v}\n" for i, r in enumerate(self.rows) for c, v in r)

    def dump(self) -> str:
        return "".join(f"row {i}: " + " ".join(f"({c},{v})" for c, v in r) + "\n"
                       for i, r in enumerate(self.rows))

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    @property
    def shape(self):
        return (self.num_rows, self.num_cols)

    def __repr__(self):
        return f"SparseIntMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz})"

    def __eq__(self, other):
        return (isinstance(other, SparseIntMatrix) and self.shape == other.shape
                and self.rows == other.rows)


def check_prime(p: int) -> None:
    if not isinstance(p, (int, np.integer)) or p < 2 or not isprime(int(p)):
        raise MatrixInputError(f"modulus {p} is not a prime")
    if p >= 2**62:
        raise MatrixInputError("modulus must be below 2**62")


# row normalization


def primitive_row(row: dict[int, int]) -> dict[int, int]:
    """Divide by the content and make the first (lowest-column) entry positive."""
    if not row:
        return row
    g = 0
    for v in row.values():
        g = math.gcd(g, v)
        if g == 1:
            break
    first = row[min(row)]
    if first < 0:
        g = -g
    if g == 1:
        return row
    return {c: v // g for c, v in row.items()}


def monic_row(row: dict[int, int], p: int) -> dict[int, int]:
    if not row:
        return row
    inv = pow(row[min(row)], -1, p)
    if inv == 1:
        return row
    return {c: v * inv % p for c, v in row.items()}


def dedupe_rows(M: SparseIntMatrix, modulus: int | None = None) -> SparseIntMatrix:
    """Drop empty rows and rows proportional to an earlier one.

    Over the integers rows are brought to primitive normal form; mod ``p`` to
    monic form (entries reduced to ``0..p-1``).
    """
    seen = set()
    out = []
    for r in M.rows:
        if modulus is None:
            row = primitive_row(dict(r))
        else:
            row = monic_row({c: v % modulus for c, v in r if v % modulus}, modulus)
        if not row:
            continue
        key = tuple(sorted(row.items()))
        if key in seen:
            continue
        seen.add(key)
        out.append(key)
    return SparseIntMatrix(len(out), M.num_cols, out)


# block decomposition


def connected_blocks(rows: list[dict]) -> list[list[int]]:
    """Group row indices into blocks that share no columns."""
    parent: dict[int, int] = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in rows:
        cols = iter(row)
        first = next(cols, None)
        if first is None:
            continue
        parent.setdefault(first, first)
        ra = find(first)
        for c in cols:
            parent.setdefault(c, c)
            rc = find(c)
            if rc != ra:
                if rc < ra:
                    ra, rc = rc, ra
                parent[rc] = ra
    groups: dict[int, list[int]] = defaultdict(list)
    for i, row in enumerate(rows):
        if row:
            groups[find(next(iter(row)))].append(i)
    return [groups[k] for k in sorted(groups, key=lambda k: groups[k][0])]


# GF(p) elimination


def _dense_rank_mod_p(A: np.ndarray, p: int) -> int:
    m, n = A.shape
    rank = 0
    for c in range(n):
        if rank == m:
            break
        nz = np.flatnonzero(A[rank:, c])
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            A[[rank, piv]] = A[[piv, rank]]
        inv = pow(int(A[rank, c]), -1, p)
        A[rank, c:] = A[rank, c:] * inv % p
        below = rank + 1 + np.flatnonzero(A[rank + 1:, c])
        if below.size:
            f = A[below, c][:, None]
            A[below, c:] = (A[below, c:] - f * A[rank, c:]) % p
        rank += 1
    return rank


def _sparse_rank_mod_p(rows: list[dict[int, int]], p: int, dense_density: float,
                       dense_min_cols: int) -> int:
    col_rows: dict[int, set[int]] = defaultdict(set)
    for i, row in enumerate(rows):
        for c in row:
            col_rows[c].add(i)
    alive = {i for i, r in enumerate(rows) if r}
    heap = [(len(rows[i]), i) for i in alive]
    heapq.heapify(heap)
    nnz = sum(len(rows[i]) for i in alive)
    rank = 0
    while alive:
        if len(col_rows) >= dense_min_cols and nnz > dense_density * len(alive) * len(col_rows):
            return rank + _finish_dense(rows, alive, col_rows, p)
        ln, r = heapq.heappop(heap)
        if r not in alive or ln != len(rows[r]):
            continue
        prow = rows[r]
        alive.discard(r)
        if not prow:
            continue
        c = min(prow, key=lambda k: (len(col_rows[k]), k))
        inv = pow(prow[c], -1, p)
        for k in prow:
            s = col_rows[k]
            s.discard(r)
            if not s:
                del col_rows[k]
        nnz -= len(prow)
        targets = sorted(col_rows.get(c, ()))
        for t in targets:
            trow = rows[t]
            f = trow[c] * inv % p
            before = len(trow)
            for k, v in prow.items():
                nv = (trow.get(k, 0) - f * v) % p
                if nv:
                    if k not in trow:
                        col_rows[k].add(t)
                    trow[k] = nv
                elif k in trow:
                    del trow[k]
                    s = col_rows[k]
                    s.discard(t)
                    if not s:
                        del col_rows[k]
            nnz += len(trow) - before
            if trow:
                heapq.heappush(heap, (len(trow), t))
            else:
                alive.discard(t)
        rank += 1
    return rank


def _finish_dense(rows, alive, col_rows, p) -> int:
    cols = sorted(col_rows)
    cidx = {c: j for j, c in enumerate(cols)}
    ridx = sorted(alive)
    dtype = np.int64 if p < _DENSE_INT64_LIMIT else object
    A = np.zeros((len(ridx), len(cols)), dtype=dtype)
    for i, r in enumerate(ridx):
        for c, v in rows[r].items():
            A[i, cidx[c]] = v
    # fewer rows than columns keeps the per-pivot update small
    if A.shape[0] > A.shape[1]:
        A = np.ascontiguousarray(A.T)
    return _dense_rank_mod_p(A, p)


def rank_mod_p(M: SparseIntMatrix, p: int, *, dense_density: float = 0.15,
               dense_min_cols: int = 48) -> int:
    """Rank of ``M`` over GF(p)."""
    check_prime(p)
    rows = [{c: v % p for c, v in r if v % p} for r in M.rows]
    total = 0
    for block in connected_blocks(rows):
        sub = [rows[i] for i in block]
        total += _sparse_rank_mod_p(sub, p, dense_density, dense_min_cols)
    return total


# elimination over the integers


def _sparse_rank_exact(rows: list[dict[int, int]]) -> int:
    col_rows: dict[int, set[int]] = defaultdict(set)
    for i, row in enumerate(rows):
        for c in row:
            col_rows[c].add(i)
    alive = {i for i, r in enumerate(rows) if r}
    heap = [(len(rows[i]), i) for i in alive]
    heapq.heapify(heap)
    rank = 0
    while alive:
        ln, r = heapq.heappop(heap)
        if r not in alive or ln != len(rows[r]):
            continue
        prow = rows[r]
        alive.discard(r)
        if not prow:
            continue
        c = min(prow, key=lambda k: (len(col_rows[k]), abs(prow[k]), k))
        pv = prow[c]
        for k in prow:
            s = col_rows[k]
            s.discard(r)
            if not s:
                del col_rows[k]
        for t in sorted(col_rows.get(c, ())):
            trow = rows[t]
            tv = trow[c]
            g = math.gcd(pv, tv)
            a, b = pv // g, tv // g
            new = {}
            for k, v in trow.items():
                new[k] = a * v
            for k, v in prow.items():
                nv = new.get(k, 0) - b * v
                if nv:
                    new[k] = nv
                else:
                    new.pop(k, None)
            for k in trow:
                if k not in new:
                    s = col_rows[k]
                    s.discard(t)
                    if not s:
                        del col_rows[k]
            for k in new:
                if k not in trow:
                    col_rows[k].add(t)
            new = primitive_row(new)
            rows[t] = new
            if new:
                heapq.heappush(heap, (len(new), t))
            else:
                alive.discard(t)
        rank += 1
    return rank


def rank_exact(M: SparseIntMatrix, *, certify_prime: int | None = CERTIFY_PRIME) -> int:
    """Rank of ``M`` over the rationals.

    With ``certify_prime`` set, a block whose rank modulo that prime already
    equals ``min(rows, cols)`` needs no integer elimination: the modular rank
    is a lower bound for the rational one.  Other blocks are eliminated over
    the integers.  ``certify_prime=None`` forces integer elimination everywhere.
    """
    rows = [dict(r) for r in M.rows]
    total = 0
    for block in connected_blocks(rows):
        sub = [rows[i] for i in block]
        if certify_prime is not None:
            ncols = len({c for r in sub for c in r})
            bound = min(len(sub), ncols)
            modp = [{c: v % certify_prime for c, v in r.items() if v % certify_prime}
                    for r in sub]
            if _sparse_rank_mod_p(modp, certify_prime, 0.15, 48) == bound:
                total += bound
                continue
        total += _sparse_rank_exact([dict(r) for r in sub])
    return total
