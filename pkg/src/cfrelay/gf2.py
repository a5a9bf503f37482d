"""Sparse and dense linear algebra over GF(2).

The sparse side is a peeling triangulation: rows with a single undetermined
column fix that column (a pivot); when no such row exists an undetermined
column is *decimated*, i.e. deferred as a symbolic unknown. Rows that run out
of undetermined columns without pivoting are *leftover* rows; together with
the decimated columns they form a small dense core that is solved with
bitset Gaussian elimination on Python integers.

The same machinery serves the systematic LDPC encoder, the LDGM quantizer and
the syndrome completion step of the relay decoder.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np


def csr_from_edges(row_ids, col_ids, n_rows: int):
    """Group ``col_ids`` by ``row_ids``; returns ``(ptr, idx)`` with sorted rows."""
    row_ids = np.asarray(row_ids, dtype=np.int64)
    col_ids = np.asarray(col_ids, dtype=np.int64)
    order = np.lexsort((col_ids, row_ids))
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(row_ids, minlength=n_rows), out=ptr[1:])
    return ptr, col_ids[order]


@dataclass
class Triangulation:
    """Outcome of :func:`triangulate`.

    ``pivots`` lists ``(row, col)`` in the order columns were fixed; each
    pivot row's other columns are pivots fixed earlier or decimated columns.
    """

    n_cols: int
    row_cols: list
    pivots: list = field(default_factory=list)
    decimated: list = field(default_factory=list)
    leftover: list = field(default_factory=list)

    @property
    def n_decimated(self) -> int:
        return len(self.decimated)


def triangulate(ptr, idx, n_cols: int, active_rows=None, unknown_cols=None) -> Triangulation:
    """Peel the sparse system given in CSR form.

    Only rows flagged in ``active_rows`` take part, and only columns flagged in
    ``unknown_cols`` count as unknowns (other columns are assumed folded into
    the right-hand side by the caller).

    Decimation policy: take the active row with the fewest undetermined
    columns (at least two) and defer its undetermined column that sits in the
    most active rows; ties go to the lowest index. Columns in no active row
    are deferred last, in index order.
    """
    n_rows = len(ptr) - 1
    ptr_l = ptr.tolist()
    idx_l = idx.tolist()
    if unknown_cols is None:
        unknown = [True] * n_cols
    else:
        unknown = np.asarray(unknown_cols, dtype=bool).tolist()
    if active_rows is None:
        active = [True] * n_rows
    else:
        active = np.asarray(active_rows, dtype=bool).tolist()

    row_cols = []
    col_rows = [[] for _ in range(n_cols)]
    for r in range(n_rows):
        cols = [c for c in idx_l[ptr_l[r]:ptr_l[r + 1]] if unknown[c]]
        row_cols.append(cols)
        if active[r]:
            for c in cols:
                col_rows[c].append(r)

    tri = Triangulation(n_cols=n_cols, row_cols=row_cols)
    cnt = [len(cols) for cols in row_cols]
    xr = [0] * n_rows
    for r in range(n_rows):
        acc = 0
        for c in row_cols[r]:
            acc ^= c
        xr[r] = acc

    determined = [not u for u in unknown]
    n_open = sum(unknown)
    queue = []
    heap = []
    for r in range(n_rows):
        if not active[r]:
            continue
        if cnt[r] == 0:
            active[r] = False
            tri.leftover.append(r)
        elif cnt[r] == 1:
            queue.append(r)
        else:
            heap.append((cnt[r], r))
    heapq.heapify(heap)

    def settle(c: int) -> None:
        nonlocal n_open
        determined[c] = True
        n_open -= 1
        for r in col_rows[c]:
            if not active[r]:
                continue
            cnt[r] -= 1
            xr[r] ^= c
            k = cnt[r]
            if k == 1:
                queue.append(r)
            elif k == 0:
                active[r] = False
                tri.leftover.append(r)
            else:
                heapq.heappush(heap, (k, r))

    spare = 0
    while n_open > 0:
        while queue:
            r = queue.pop()
            if not active[r] or cnt[r] != 1:
                continue
            c = xr[r]
            active[r] = False
            tri.pivots.append((r, c))
            settle(c)
        if n_open == 0:
            break
        choice = -1
        while heap:
            k, r = heapq.heappop(heap)
            if not active[r] or cnt[r] != k:
                continue
            best = -1
            for c in row_cols[r]:
                if determined[c]:
                    continue
                load = sum(1 for rr in col_rows[c] if active[rr])
                if load > best or (load == best and c < choice):
                    best, choice = load, c
            break
        if choice < 0:
            while determined[spare]:
                spare += 1
            choice = spare
        tri.decimated.append(choice)
        settle(choice)
    return tri


def forward_substitute(tri: Triangulation, rhs, decimated_values=None) -> np.ndarray:
    """Fix every pivot column given the right-hand side and deferred values.

    Columns that were never unknown stay 0; callers fold them into ``rhs``.
    """
    x = [0] * tri.n_cols
    if decimated_values is not None:
        for c, val in zip(tri.decimated, np.asarray(decimated_values).tolist()):
            x[c] = int(val)
    rhs_l = np.asarray(rhs, dtype=np.int64).tolist()
    row_cols = tri.row_cols
    for r, c in tri.pivots:
        acc = rhs_l[r]
        for j in row_cols[r]:
            acc ^= x[j]
        x[c] = acc ^ x[c]
    return np.array(x, dtype=np.uint8)


def row_residuals(tri: Triangulation, rows, rhs, x) -> np.ndarray:
    """``rhs[r] XOR (row r . x)`` for each row in ``rows``."""
    x_l = np.asarray(x, dtype=np.int64).tolist()
    rhs_l = np.asarray(rhs, dtype=np.int64).tolist()
    out = []
    for r in rows:
        acc = rhs_l[r]
        for j in tri.row_cols[r]:
            acc ^= x_l[j]
        out.append(acc)
    return np.array(out, dtype=np.uint8)


def leftover_rows_as_ints(tri: Triangulation) -> list:
    """Express each leftover row as a bitset over the decimated columns.

    Bit ``i`` of entry ``j`` is the coefficient of ``decimated[i]`` in
    leftover row ``j`` once all pivot columns are substituted away.
    """
    n_left = len(tri.leftover)
    if n_left == 0:
        return []
    coef = [0] * tri.n_cols
    for j, r in enumerate(tri.leftover):
        bit = 1 << j
        for c in tri.row_cols[r]:
            coef[c] ^= bit
    row_cols = tri.row_cols
    for r, c in reversed(tri.pivots):
        w = coef[c]
        if w:
            for j in row_cols[r]:
                if j != c:
                    coef[j] ^= w
            coef[c] = 0
    rows = [0] * n_left
    for i, c in enumerate(tri.decimated):
        w = coef[c]
        while w:
            low = w & -w
            rows[low.bit_length() - 1] |= 1 << i
            w ^= low
    return rows


def rref(rows: list, n_cols: int):
    """Reduced row echelon form of bitset rows over the low ``n_cols`` bits.

    Bits at positions ``>= n_cols`` ride along (augmented right-hand sides).
    Returns ``(reduced, pivot_cols)``; the first ``len(pivot_cols)`` reduced
    rows carry the pivots, the remainder are zero on the low bits.
    """
    work = list(rows)
    mask = (1 << n_cols) - 1
    pivot_cols = []
    top = 0
    while top < len(work):
        sel = -1
        for k in range(top, len(work)):
            if work[k] & mask:
                sel = k
                break
        if sel < 0:
            break
        work[top], work[sel] = work[sel], work[top]
        low = work[top] & mask
        col = (low & -low).bit_length() - 1
        bit = 1 << col
        piv = work[top]
        for k in range(len(work)):
            if k != top and work[k] & bit:
                work[k] ^= piv
        pivot_cols.append(col)
        top += 1
    return work, pivot_cols


def solve_core(tri: Triangulation, rhs):
    """Choose deferred values that satisfy as many leftover rows as possible.

    Returns ``(x, unsatisfied_rows, unique)`` where ``unique`` means the
    deferred columns were pinned down by the leftover rows (full column rank).
    """
    x0 = forward_substitute(tri, rhs)
    res = row_residuals(tri, tri.leftover, rhs, x0)
    n_dec = len(tri.decimated)
    rows = leftover_rows_as_ints(tri)
    aug = [row | (int(b) << n_dec) for row, b in zip(rows, res.tolist())]
    reduced, pivots = rref(aug, n_dec)
    values = np.zeros(n_dec, dtype=np.uint8)
    for row, col in zip(reduced, pivots):
        values[col] = (row >> n_dec) & 1
    x = forward_substitute(tri, rhs, values)
    final = row_residuals(tri, tri.leftover, rhs, x)
    bad = [r for r, v in zip(tri.leftover, final.tolist()) if v]
    return x, bad, len(pivots) == n_dec


def solution_space(tri: Triangulation, rhs, max_basis: int | None = None):
    """Particular solution and null-space basis of a consistent system.

    Returns ``(x0, basis)`` with every solution equal to ``x0`` plus a GF(2)
    combination of the basis rows, or ``(None, [])`` if the system is
    inconsistent. Only columns that were unknown to ``triangulate`` vary.
    When the null space has more than ``max_basis`` dimensions the basis is
    not built and ``(x0, None)`` is returned.
    """
    x0, bad, _ = solve_core(tri, rhs)
    if bad:
        return None, []
    n_dec = len(tri.decimated)
    if max_basis is not None and n_dec - len(tri.leftover) > max_basis:
        return x0, None
    reduced, pivots = rref(leftover_rows_as_ints(tri), n_dec)
    if max_basis is not None and n_dec - len(pivots) > max_basis:
        return x0, None
    pivset = set(pivots)
    zero = np.zeros(len(tri.row_cols), dtype=np.uint8)
    basis = []
    for f in range(n_dec):
        if f in pivset:
            continue
        vals = np.zeros(n_dec, dtype=np.uint8)
        vals[f] = 1
        for row, col in zip(reduced, pivots):
            vals[col] = (row >> f) & 1
        basis.append(forward_substitute(tri, zero, vals))
    return x0, basis
