"""Relay-side compression of the ternary observation and its reconstruction.

Each relay symbol becomes a pair of constrained bits ``a = c XOR v`` with the
shared dither ``v``: 0 -> (0,0), 1 -> (0,1), E -> (1,*). The quantizer finds
LDGM information bits ``b`` with ``c = bG`` meeting every forced bit except a
small flip set ``zeta``; the relay sends the syndrome ``p = bH^T`` and
``zeta``.

The destination runs sum-product BP on the joint graph (pair factors from its
own observation, the LDGM layer, the syndrome checks). Because the side
information is soft (an erased ``y_d`` still biases the pair), BP runs on
log-likelihood ratios. When BP stalls with most ``b`` already confident, the
remaining bits are solved exactly from the syndrome equations (syndrome
completion). A reconstruction is only accepted if it satisfies every hard
constraint.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .channel import ERASED, make_rng
from .gf2 import csr_from_edges, solution_space, solve_core, triangulate
from .graph import CodeInstance


class ReconstructionFailure(RuntimeError):
    pass


class IntegrityError(RuntimeError):
    pass


class BitConstraint(IntEnum):
    FORCED_ZERO = 0
    FORCED_ONE = 1
    DONT_CARE = 2


@dataclass(frozen=True)
class DitherSequence:
    bits: np.ndarray
    seed: int

    @classmethod
    def from_seed(cls, seed: int, n: int) -> "DitherSequence":
        return cls(make_rng(seed).integers(0, 2, 2 * n, dtype=np.uint8), int(seed))


def map_constraints(y_r, v) -> np.ndarray:
    """Per c-bit constraint (length ``2n``) for relay symbols ``y_r`` and dither ``v``."""
    y = np.asarray(y_r, dtype=np.uint8)
    bits = v.bits if isinstance(v, DitherSequence) else np.asarray(v, dtype=np.uint8)
    if bits.shape != (2 * y.size,):
        raise ValueError("dither must have two bits per relay symbol")
    er = y == ERASED
    a = np.empty(2 * y.size, dtype=np.uint8)
    a[0::2] = er
    a[1::2] = np.where(er, 0, y)
    out = (a ^ bits).astype(np.uint8)
    out[1::2][er] = BitConstraint.DONT_CARE
    return out


def constraint_pairs_to_yr(a_pairs) -> np.ndarray:
    """Invert the symbol map on dithered pairs ``a``: (0,x) -> x, (1,*) -> E."""
    a = np.asarray(a_pairs, dtype=np.uint8).reshape(-1, 2)
    return np.where(a[:, 0] == 1, ERASED, a[:, 1]).astype(np.uint8)


# --------------------------------------------------------------- quantizer

def _g_rows(inst: CodeInstance):
    """c-rows over b-columns of the generator graph."""
    g = inst.graphs["G"]
    left, right = g.edges()
    return csr_from_edges(right, left, g.n_right)


def encode_ldgm(inst: CodeInstance, b) -> np.ndarray:
    g = inst.graphs["G"]
    left, right = g.edges()
    x = np.asarray(b, dtype=np.int64)
    return (np.bincount(right, weights=x[left], minlength=g.n_right).astype(np.int64) & 1).astype(np.uint8)


@dataclass
class QuantizeResult:
    b: np.ndarray
    zeta: np.ndarray
    decimations: int
    leftover: int


def quantize(inst: CodeInstance, constraints) -> QuantizeResult:
    """Choose ``b`` so that ``bG`` meets the forced c-bits up to a flip set.

    Peeling runs from forced c-bits with a single undetermined b-neighbour.
    When it stalls, a b-bit is deferred as a symbolic unknown (the b-bit of
    the most constrained pending c-bit that sits in the most pending c-bits,
    lowest index on ties). Forced c-bits whose b-neighbours all end up fixed
    without pivoting form a small system over the deferred bits; it is solved
    by elimination (free deferred bits take 0) and rows it cannot satisfy
    become the flip set.
    """
    cons = np.asarray(constraints, dtype=np.uint8)
    if cons.shape != (2 * inst.n,):
        raise ValueError("constraint count must be 2n")
    forced = cons != BitConstraint.DONT_CARE
    rhs = np.where(forced, cons, 0).astype(np.uint8)
    ptr, idx = _g_rows(inst)
    tri = triangulate(ptr, idx, inst.m, active_rows=forced)
    b, bad, _ = solve_core(tri, rhs)
    c = encode_ldgm(inst, b)
    zeta = np.flatnonzero(forced & (c != rhs))
    if not np.array_equal(zeta, np.sort(np.asarray(bad, dtype=np.int64))):
        raise AssertionError("flip set disagrees with the core solve")
    return QuantizeResult(b.astype(np.uint8), zeta.astype(np.int64), tri.n_decimated, len(tri.leftover))


def verify_quantization(inst: CodeInstance, constraints, b, zeta) -> bool:
    """Forced bits outside ``zeta`` are met and those inside are violated."""
    cons = np.asarray(constraints, dtype=np.uint8)
    c = encode_ldgm(inst, b)
    forced = cons != BitConstraint.DONT_CARE
    in_zeta = np.zeros(cons.size, dtype=bool)
    in_zeta[np.asarray(zeta, dtype=np.int64)] = True
    if np.any(in_zeta & ~forced):
        return False
    ok = c == cons
    return bool(np.all(ok[forced & ~in_zeta]) and not np.any(ok[in_zeta]))


def compute_syndrome(inst: CodeInstance, b) -> np.ndarray:
    h = inst.graphs["H"]
    x = np.asarray(b, dtype=np.int64)
    if x.shape != (h.n_left,):
        raise ValueError(f"b must have {h.n_left} bits")
    left, right = h.edges()
    return (np.bincount(right, weights=x[left], minlength=h.n_right).astype(np.int64) & 1).astype(np.uint8)


# ----------------------------------------------------------------- payload

MAGIC = b"CFRP"
PAYLOAD_VERSION = 1
_HEADER = struct.Struct("<4sBIIIIQ")


@dataclass(frozen=True)
class CompressedPayload:
    """Syndrome ``p`` (t bits) and sorted flip positions ``zeta``.

    Byte layout (little-endian): magic ``CFRP``, u8 version, u32 n, m, t,
    |zeta|, u64 dither seed, then ``p`` packed LSB-first, then ``zeta`` as u32.
    """

    p: np.ndarray
    zeta: np.ndarray
    n: int
    m: int
    t: int
    dither_seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.uint8)
        z = np.sort(np.asarray(self.zeta, dtype=np.int64))
        if p.shape != (self.t,):
            raise ValueError("syndrome length must equal t")
        if z.size and (z[0] < 0 or z[-1] >= 2 * self.n or np.any(np.diff(z) == 0)):
            raise ValueError("flip positions must be distinct and lie in [0, 2n)")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "zeta", z)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, PAYLOAD_VERSION, self.n, self.m, self.t, self.zeta.size, self.dither_seed)
        return head + np.packbits(self.p, bitorder="little").tobytes() + self.zeta.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedPayload":
        if len(data) < _HEADER.size:
            raise ValueError("payload shorter than its header")
        magic, ver, n, m, t, nz, seed = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError("bad payload magic")
        if ver != PAYLOAD_VERSION:
            raise ValueError(f"unsupported payload version {ver}")
        nbytes = (t + 7) // 8
        if len(data) != _HEADER.size + nbytes + 4 * nz:
            raise ValueError("payload length does not match its header")
        raw = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=_HEADER.size)
        p = np.unpackbits(raw, bitorder="little")[:t]
        zeta = np.frombuffer(data, dtype="<u4", count=nz, offset=_HEADER.size + nbytes).astype(np.int64)
        return cls(p, zeta, n, m, t, seed)

    @property
    def bits(self) -> int:
        return 8 * (_HEADER.size + (self.t + 7) // 8 + 4 * self.zeta.size)


def compress(inst: CodeInstance, y_r, v: DitherSequence):
    """Relay pipeline: map, quantize, syndrome. Returns ``(payload, quantize result)``."""
    q = quantize(inst, map_constraints(y_r, v))
    payload = CompressedPayload(compute_syndrome(inst, q.b), q.zeta, inst.n, inst.m, inst.t, v.seed)
    return payload, q


# ---------------------------------------------------------- reconstruction

_CLIP = 30.0


def pair_prior(y_d, epsilon: float) -> np.ndarray:
    """``P(a | y_d)`` up to scale, shape ``(n, 2, 2)`` over the dithered pair.

    With ``y_d = x`` known the relay saw x or an erasure: (0,x) has weight
    ``1-e``, (1,0) and (1,1) ``e/2``, and (0,1-x) is impossible. With ``y_d``
    erased the relay symbol is uniform over 0/1 when seen.
    """
    y = np.asarray(y_d, dtype=np.uint8)
    tab = np.empty((y.size, 2, 2))
    tab[:, 0, :] = (1.0 - epsilon) / 2
    tab[:, 1, :] = epsilon / 2
    for x in (0, 1):
        sel = y == x
        tab[sel, 0, x] = 1.0 - epsilon
        tab[sel, 0, 1 - x] = 0.0
    return tab


def _atanh2(t):
    return 2.0 * np.arctanh(np.clip(t, -1 + 1e-15, 1 - 1e-15))


class _SegmentProduct:
    """Exclusive and full products of tanh values grouped by a segment id."""

    def __init__(self, seg: np.ndarray, n_seg: int):
        self.seg = seg
        self.n_seg = n_seg

    def __call__(self, th, extra=None):
        mag = np.maximum(np.abs(th), 1e-300)
        lg = np.log(mag)
        neg = th < 0
        tot = np.bincount(self.seg, weights=lg, minlength=self.n_seg)
        sgn = np.bincount(self.seg, weights=neg, minlength=self.n_seg).astype(np.int64)
        if extra is not None:
            tot = tot + np.log(np.maximum(np.abs(extra), 1e-300))
            sgn = sgn + (extra < 0)
        ex = np.exp(tot[self.seg] - lg)
        ex = np.where((sgn[self.seg] - neg) % 2 == 1, -ex, ex)
        full = np.exp(tot)
        full = np.where(sgn % 2 == 1, -full, full)
        return ex, full


@dataclass
class ReconstructResult:
    y_r: np.ndarray | None
    b: np.ndarray | None
    success: bool
    iterations: int
    residual_unknown: int
    completed: bool = False


class _Graph:
    """Index arrays of the joint decoding graph."""

    def __init__(self, inst: CodeInstance):
        self.n, self.m, self.t = inst.n, inst.m, inst.t
        self.gb, self.gc = inst.graphs["G"].edges()
        self.hb, self.hp = inst.graphs["H"].edges()
        self.h_ptr, self.h_idx = csr_from_edges(self.hp, self.hb, self.t)
        self.c_prod = _SegmentProduct(self.gc, 2 * self.n)
        self.p_prod = _SegmentProduct(self.hp, self.t)


def _allowed(prior: np.ndarray, a: np.ndarray) -> bool:
    pairs = a.reshape(-1, 2)
    return bool(np.all(prior[np.arange(pairs.shape[0]), pairs[:, 0], pairs[:, 1]] > 0))


def _try_completion(gr: _Graph, inst, llr, p, s, prior, threshold, max_free: int = 10):
    """Fix b-bits with ``|llr| >= threshold``; solve the rest from the syndrome.

    Known pairs also yield linear equations: with ``a_1 = 0`` fixed and
    ``y_d`` known, ``a_2`` is forced; with ``a_2`` fixed to the impossible
    value, ``a_1`` must be 1. If at most ``2**max_free`` solutions remain
    they are all checked against the pair constraints; the completion is
    accepted only when exactly one relay observation survives.
    """
    known = np.abs(llr) >= threshold
    b_hat = (llr < 0).astype(np.uint8)
    unknown = ~known
    basis = []
    if not unknown.any():
        cand = b_hat
    else:
        rows_b = [gr.h_ptr, gr.h_idx]
        rhs = [p.astype(np.uint8)]
        # pair-implied rows from c-bits whose b-neighbours are all known
        g_ptr, g_idx = _g_rows(inst)
        n_unknown_per_c = np.bincount(gr.gc, weights=unknown[gr.gb], minlength=2 * gr.n)
        c_known = n_unknown_per_c == 0
        c_val = encode_ldgm(inst, np.where(known, b_hat, 0))
        a_val = c_val ^ s
        first, second = np.arange(0, 2 * gr.n, 2), np.arange(1, 2 * gr.n, 2)
        blocked = prior[:, 0, :] == 0  # (n, 2): a_1 = 0 with this a_2 is impossible
        extra_rows, extra_rhs = [], []
        # a_1 known 0 -> a_2 must take the allowed value
        sel = c_known[first] & (a_val[first] == 0) & blocked.any(axis=1) & ~c_known[second]
        for i in np.flatnonzero(sel):
            want = 0 if blocked[i, 1] else 1
            extra_rows.append(second[i])
            extra_rhs.append(want ^ s[second[i]])
        # a_2 known at a blocked value -> a_1 must be 1
        sel = c_known[second] & ~c_known[first]
        for i in np.flatnonzero(sel):
            if blocked[i, a_val[second[i]]]:
                extra_rows.append(first[i])
                extra_rhs.append(1 ^ s[first[i]])
        if extra_rows:
            er = np.asarray(extra_rows, dtype=np.int64)
            lens = g_ptr[er + 1] - g_ptr[er]
            ptr_e = np.zeros(er.size + 1, dtype=np.int64)
            np.cumsum(lens, out=ptr_e[1:])
            idx_e = np.concatenate([g_idx[g_ptr[r]:g_ptr[r + 1]] for r in er])
            ptr = np.concatenate([gr.h_ptr, gr.h_ptr[-1] + ptr_e[1:]])
            idx = np.concatenate([gr.h_idx, idx_e])
            rhs_all = np.concatenate([rhs[0], np.asarray(extra_rhs, dtype=np.uint8)])
        else:
            ptr, idx, rhs_all = rows_b[0], rows_b[1], rhs[0]
        # fold the known columns into the right-hand side
        rows = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
        kb = np.where(known, b_hat, 0).astype(np.int64)
        fold = (np.bincount(rows, weights=kb[idx], minlength=len(ptr) - 1).astype(np.int64) & 1).astype(np.uint8)
        tri = triangulate(ptr, idx, gr.m, unknown_cols=unknown)
        if tri.n_decimated - len(tri.leftover) > max_free:
            return None  # the null space is at least this large
        x0, basis = solution_space(tri, rhs_all ^ fold, max_basis=max_free)
        if x0 is None or basis is None:
            return None
        cand = np.where(known, b_hat, x0).astype(np.uint8)
        if basis:
            combos = np.array(list(itertools.product((0, 1), repeat=len(basis))), dtype=np.int64)
            cands = cand ^ (combos @ np.array(basis, dtype=np.int64) % 2).astype(np.uint8)
    cands = cands if unknown.any() and basis else [cand]
    found = None
    for b in cands:
        if not np.array_equal(compute_syndrome(inst, b), p):
            continue
        a = encode_ldgm(inst, b) ^ s
        if not _allowed(prior, a):
            continue
        if found is not None and not np.array_equal(constraint_pairs_to_yr(a), found[1]):
            return None  # ambiguous: refuse rather than guess
        if found is None:
            found = (b, constraint_pairs_to_yr(a))
    return None if found is None else found[0]


def reconstruct_yr(inst: CodeInstance, payload: CompressedPayload, y_d, v: DitherSequence, epsilon: float,
                   max_iters: int = 600, completion_thresholds=(29.0, 20.0, 12.0), stall_window: int = 25,
                   damping: float = 0.0):
    """Recover the relay observation from the payload and destination side information.

    Returns a ``ReconstructResult``; on success ``y_r`` satisfies the syndrome,
    the flip set and the side-information constraints exactly.
    """
    if payload.n != inst.n or payload.m != inst.m or payload.t != inst.t:
        raise ValueError("payload dimensions do not match the instance")
    yd = np.asarray(y_d, dtype=np.uint8)
    if yd.shape != (inst.n,):
        raise ValueError("y_d length must equal n")
    gr = _Graph(inst)
    n, m = gr.n, gr.m
    zeta_mask = np.zeros(2 * n, dtype=np.uint8)
    zeta_mask[payload.zeta] = 1
    s = (v.bits ^ zeta_mask).astype(np.uint8)
    prior = pair_prior(yd, epsilon)
    # pair table over c: flip axes where s = 1
    s2 = s.reshape(n, 2)
    tc = prior.copy()
    f1 = s2[:, 0] == 1
    tc[f1] = tc[f1][:, ::-1, :]
    f2 = s2[:, 1] == 1
    tc[f2] = tc[f2][:, :, ::-1]
    p = payload.p
    psign = np.where(p[gr.hp] == 1, -1.0, 1.0)
    qg = np.zeros(gr.gb.size)
    qh = np.zeros(gr.hb.size)
    pi_c = np.zeros(2 * n)
    last_hard = None
    steady = 0
    tried_at = -10 ** 9
    total = np.zeros(m)
    for it in range(1, max_iters + 1):
        # c-nodes: XOR of b-neighbours, with the pair message as an extra input
        ex, full = gr.c_prod(np.tanh(qg / 2))
        mu = _atanh2(full)
        rg_new = np.clip(_atanh2(ex * np.tanh(pi_c / 2)[gr.gc]), -_CLIP, _CLIP)
        rg = rg_new if it == 1 else (1 - damping) * rg_new + damping * rg
        # pair factors
        p1 = 1.0 / (1.0 + np.exp(np.clip(mu.reshape(n, 2), -50, 50)))
        pc1 = np.stack([1 - p1[:, 0], p1[:, 0]], 1)
        pc2 = np.stack([1 - p1[:, 1], p1[:, 1]], 1)
        m1 = np.einsum("nab,nb->na", tc, pc2)
        m2 = np.einsum("nab,na->nb", tc, pc1)
        l1 = np.log(np.maximum(m1[:, 0], 1e-300)) - np.log(np.maximum(m1[:, 1], 1e-300))
        l2 = np.log(np.maximum(m2[:, 0], 1e-300)) - np.log(np.maximum(m2[:, 1], 1e-300))
        pi_c = np.clip(np.stack([l1, l2], 1).reshape(-1), -_CLIP, _CLIP)
        # syndrome checks
        ex_h, _ = gr.p_prod(np.tanh(qh / 2))
        rh_new = np.clip(psign * _atanh2(ex_h), -_CLIP, _CLIP)
        rh = rh_new if it == 1 else (1 - damping) * rh_new + damping * rh
        # b-nodes
        total = np.bincount(gr.gb, weights=rg, minlength=m) + np.bincount(gr.hb, weights=rh, minlength=m)
        qg = np.clip(total[gr.gb] - rg, -_CLIP, _CLIP)
        qh = np.clip(total[gr.hb] - rh, -_CLIP, _CLIP)
        hard = (total < 0).astype(np.uint8)
        if np.array_equal(compute_syndrome(inst, hard), p):
            a = encode_ldgm(inst, hard) ^ s
            if _allowed(prior, a):
                return ReconstructResult(constraint_pairs_to_yr(a), hard, True, it, 0)
        steady = steady + 1 if last_hard is not None and np.array_equal(hard, last_hard) else 0
        last_hard = hard
        if steady >= stall_window and it - tried_at >= stall_window:
            tried_at = it
            for thr in completion_thresholds:
                cand = _try_completion(gr, inst, total, p, s, prior, thr)
                if cand is not None:
                    a = encode_ldgm(inst, cand) ^ s
                    return ReconstructResult(constraint_pairs_to_yr(a), cand, True, it, 0, completed=True)
    # last resort: ignore the beliefs altogether (exhaustive on tiny codes)
    for thr in tuple(completion_thresholds) + (np.inf,):
        cand = _try_completion(gr, inst, total, p, s, prior, thr)
        if cand is not None:
            a = encode_ldgm(inst, cand) ^ s
            return ReconstructResult(constraint_pairs_to_yr(a), cand, True, max_iters, 0, completed=True)
    unresolved = int(np.sum(np.abs(total) < completion_thresholds[-1]))
    return ReconstructResult(None, None, False, max_iters, unresolved)
