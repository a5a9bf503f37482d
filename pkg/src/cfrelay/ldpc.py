"""Source LDPC code: systematic encoding and erasure decoding.

Encoding triangulates the parity-check matrix once. Columns fixed by peeling
are parity positions; deferred columns that the small dense core does not pin
down carry the message. Decoding over the erasure channel is peeling; an
optional core solve turns it into the maximum-likelihood erasure decoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ERASED
from .gf2 import (csr_from_edges, forward_substitute, leftover_rows_as_ints, rref, solution_space, solve_core,
                  triangulate)
from .graph import CodeInstance


class IntegrityError(RuntimeError):
    """Observations contradict each other or the code constraints."""


def check_csr(inst: CodeInstance):
    """``(ptr, idx)`` of the parity checks (rows) over code bits (columns)."""
    g = inst.graphs["qs"]
    left, right = g.edges()
    return csr_from_edges(right, left, g.n_right)


@dataclass
class SystematicEncoder:
    n: int
    k_checks: int
    rank: int
    message_positions: np.ndarray
    _tri: object
    _core_rows: list
    _core_pivots: list
    _free_slots: list

    @property
    def message_length(self) -> int:
        return int(self.message_positions.size)

    @property
    def rank_deficiency(self) -> int:
        return self.k_checks - self.rank

    def encode(self, message) -> np.ndarray:
        w = np.asarray(message, dtype=np.uint8)
        if w.shape != (self.message_length,):
            raise ValueError(f"message must have {self.message_length} bits")
        n_dec = len(self._tri.decimated)
        vals = np.zeros(n_dec, dtype=np.uint8)
        vals[self._free_slots] = w
        free_mask = 0
        for slot, bit in zip(self._free_slots, w.tolist()):
            if bit:
                free_mask |= 1 << slot
        for row, col in zip(self._core_rows, self._core_pivots):
            vals[col] = (row & free_mask).bit_count() & 1
        return forward_substitute(self._tri, np.zeros(len(self._tri.row_cols), dtype=np.uint8), vals)

    def extract(self, codeword) -> np.ndarray:
        return np.asarray(codeword, dtype=np.uint8)[self.message_positions]


def build_systematic_encoder(inst: CodeInstance) -> SystematicEncoder:
    ptr, idx = check_csr(inst)
    n = inst.n
    tri = triangulate(ptr, idx, n)
    n_dec = len(tri.decimated)
    reduced, pivots = rref(leftover_rows_as_ints(tri), n_dec)
    core_rows = reduced[:len(pivots)]
    free = [i for i in range(n_dec) if i not in set(pivots)]
    positions = np.array([tri.decimated[i] for i in free], dtype=np.int64)
    rank = len(tri.pivots) + len(pivots)
    return SystematicEncoder(n, inst.k, rank, positions, tri, core_rows, pivots, free)


def syndrome(inst: CodeInstance, word) -> np.ndarray:
    g = inst.graphs["qs"]
    left, right = g.edges()
    x = np.asarray(word, dtype=np.int64)
    return (np.bincount(right, weights=x[left], minlength=g.n_right).astype(np.int64) & 1).astype(np.uint8)


@dataclass
class PeelResult:
    word: np.ndarray
    success: bool
    residual: np.ndarray
    iterations: int


def peel_decode(inst: CodeInstance, observed, resolve_core: bool = False, max_null: int = 256) -> PeelResult:
    """Resolve erasures through checks with a single erased neighbour.

    Peeling proceeds in rounds (one round = one parallel sweep of the
    currently degree-one checks). With ``resolve_core`` a stalled decoder
    finishes by Gaussian elimination on the residual system: every bit that
    takes the same value in all solutions is filled in (bitwise ML on the
    erasure channel), provided the solution space has at most
    ``2**max_null`` members. Contradictory parities raise ``IntegrityError``.
    """
    y = np.asarray(observed, dtype=np.uint8)
    if y.shape != (inst.n,):
        raise ValueError("observation length must equal n")
    ptr, idx = check_csr(inst)
    word = y.copy()
    erased = word == ERASED
    known_vals = np.where(erased, 0, word).astype(np.int64)
    rows = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
    parity = (np.bincount(rows, weights=known_vals[idx], minlength=len(ptr) - 1).astype(np.int64) & 1).tolist()
    cnt = np.bincount(rows, weights=erased[idx], minlength=len(ptr) - 1).astype(np.int64).tolist()
    xr = np.zeros(len(ptr) - 1, dtype=np.int64)
    np.bitwise_xor.at(xr, rows[erased[idx]], idx[erased[idx]])
    xr = xr.tolist()
    for r in range(len(cnt)):
        if cnt[r] == 0 and parity[r]:
            raise IntegrityError(f"check {r} is violated by the observed bits")
    col_checks = [[] for _ in range(inst.n)]
    for r, c in zip(rows.tolist(), idx.tolist()):
        if erased[c]:
            col_checks[c].append(r)
    out = word.tolist()
    frontier = [r for r in range(len(cnt)) if cnt[r] == 1]
    rounds = 0
    while frontier:
        rounds += 1
        nxt = []
        for r in frontier:
            if cnt[r] != 1:
                continue
            c = xr[r]
            val = parity[r]
            out[c] = val
            for rr in col_checks[c]:
                cnt[rr] -= 1
                xr[rr] ^= c
                parity[rr] ^= val
                if cnt[rr] == 1:
                    nxt.append(rr)
                elif cnt[rr] == 0 and parity[rr]:
                    raise IntegrityError(f"check {rr} is violated after peeling")
        frontier = nxt
    word = np.array(out, dtype=np.uint8)
    residual = np.flatnonzero(word == ERASED)
    if residual.size and resolve_core:
        rhs = syndrome(inst, np.where(word == ERASED, 0, word))
        tri = triangulate(ptr, idx, inst.n, unknown_cols=word == ERASED)
        sol, bad, unique = solve_core(tri, rhs)
        if bad:
            raise IntegrityError("residual system is inconsistent")
        if unique:
            word[residual] = sol[residual]
            residual = residual[:0]
        else:
            x0, basis = solution_space(tri, rhs, max_basis=max_null)
            if basis is not None:
                free = np.zeros(inst.n, dtype=bool)
                for vec in basis:
                    free |= vec.astype(bool)
                fixed = residual[~free[residual]]
                word[fixed] = x0[fixed]
                residual = residual[free[residual]]
    return PeelResult(word, residual.size == 0, residual, rounds)


def merge_observations(y_d, y_r) -> np.ndarray:
    """Known in either copy wins; disagreement on a jointly known bit is an error."""
    a = np.asarray(y_d, dtype=np.uint8)
    b = np.asarray(y_r, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError("observation lengths differ")
    both = (a != ERASED) & (b != ERASED)
    if np.any(a[both] != b[both]):
        raise IntegrityError("destination and relay observations disagree")
    return np.where(a != ERASED, a, b).astype(np.uint8)


@dataclass
class DestinationResult:
    message: np.ndarray
    success: bool
    unresolved_message_bits: int
    iterations: int


def destination_decode(inst: CodeInstance, encoder: SystematicEncoder, y_d, y_r_recovered,
                       resolve_core: bool = True) -> DestinationResult:
    """Merge both observations, decode, and read the message positions.

    Peeling runs first; a stalled decoder finishes by elimination on the
    residual system. Message bits left unresolved are reported as 0.
    """
    merged = merge_observations(y_d, y_r_recovered)
    res = peel_decode(inst, merged, resolve_core=resolve_core)
    msg = encoder.extract(res.word)
    unresolved = msg == ERASED
    return DestinationResult(np.where(unresolved, 0, msg).astype(np.uint8), res.success,
                             int(unresolved.sum()), res.iterations)
