"""EXIT/EBP curves and degree-distribution design by linear programming.

Three designs are covered:

* the source LDPC code (q-nodes, regular s-checks of degree ``d_s``),
* the LDGM quantization layer of the nested code (regular b-nodes of degree
  ``d_b``, irregular c-nodes),
* the LDPC binning layer on the LDGM information bits (b-nodes and p-checks).

All curves use the erasure-channel MI surrogate, so every map below is a
polynomial in the incoming MI. The LPs are solved with HiGHS through
``scipy.optimize.linprog``; constraints are imposed on a uniform grid and then
re-verified on a grid ten times finer, with violated points fed back as cuts.

Decoding-gap constraints use a tapered requirement
``min(gap, taper * (1 - target))``: a constant gap cannot be met where both
curves meet at (1, 1). For the source code the taper also bounds the
degree-2 edge fraction (the stability condition) well inside its limit, which
keeps short cycles of degree-2 nodes rare at moderate block lengths.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .channel import ERASED, ChannelParams, joint_table


class InfeasibleDesignError(RuntimeError):
    """Raised when an LP has no feasible point; ``grid_point`` locates the worst violation."""

    def __init__(self, message: str, grid_point: float | None = None):
        super().__init__(message if grid_point is None else f"{message} (worst grid point {grid_point:.6g})")
        self.grid_point = grid_point


class StallError(RuntimeError):
    """Raised when an alternating optimization makes no admissible progress."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution ``{d: v_d}``."""

    degrees: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        v = np.asarray(self.fractions, dtype=float)
        if d.shape != v.shape or d.ndim != 1 or d.size == 0:
            raise ValueError("degrees and fractions must be equal-length 1-D arrays")
        if np.any(d < 1) or len(np.unique(d)) != d.size:
            raise ValueError("degrees must be distinct positive integers")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"fractions must be nonnegative and sum to 1 (sum={v.sum()!r})")
        order = np.argsort(d)
        object.__setattr__(self, "degrees", d[order])
        object.__setattr__(self, "fractions", v[order])

    @classmethod
    def from_mapping(cls, mapping: dict, normalize: bool = False) -> "DegreeDistribution":
        items = [(int(k), float(w)) for k, w in mapping.items() if float(w) > 0]
        d = np.array([k for k, _ in items])
        v = np.array([w for _, w in items])
        if normalize:
            v = v / v.sum()
        return cls(d, v)

    @classmethod
    def from_weights(cls, degrees, weights, floor: float = 1e-10) -> "DegreeDistribution":
        """Clean a solver output: clip tiny or negative weights and renormalize."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        w[w < floor] = 0.0
        keep = w > 0
        w = w[keep]
        return cls(np.asarray(degrees)[keep], w / w.sum())

    @classmethod
    def regular(cls, d: int) -> "DegreeDistribution":
        return cls(np.array([d]), np.array([1.0]))

    @classmethod
    def from_node_fractions(cls, degrees, node_fracs) -> "DegreeDistribution":
        d = np.asarray(degrees, dtype=float)
        w = np.asarray(node_fracs, dtype=float) * d
        return cls.from_weights(degrees, w / w.sum())

    def as_dict(self) -> dict:
        return {int(d): float(v) for d, v in zip(self.degrees, self.fractions)}

    @property
    def inv_avg(self) -> float:
        """``sum_d v_d / d``, the node count per edge."""
        return float(np.sum(self.fractions / self.degrees))

    @property
    def avg_node_degree(self) -> float:
        return 1.0 / self.inv_avg

    def node_fractions(self) -> np.ndarray:
        w = self.fractions / self.degrees
        return w / w.sum()

    def edge_poly(self, x) -> np.ndarray:
        """``sum_d v_d x^(d-1)``."""
        x = np.asarray(x, dtype=float)
        return np.power.outer(x, self.degrees - 1) @ self.fractions

    def __eq__(self, other):
        if not isinstance(other, DegreeDistribution):
            return NotImplemented
        return np.array_equal(self.degrees, other.degrees) and np.array_equal(self.fractions, other.fractions)

    def __hash__(self):
        return hash((tuple(self.degrees.tolist()), tuple(self.fractions.tolist())))


@dataclass(frozen=True)
class ExitCurve:
    grid: np.ndarray
    values: np.ndarray
    labels: tuple = ("x", "y")

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if g.shape != y.shape or g.ndim != 1 or g.size == 0:
            raise ValueError("grid and values must be equal-length 1-D arrays")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly ascending")
        if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
            raise ValueError("curve abscissae must lie in [0, 1]")
        # ordinates below 0 occur on required-prior curves where decoding self-starts
        if not np.all(np.isfinite(y)) or np.any(y < -1) or np.any(y > 1 + 1e-12):
            raise ValueError("curve ordinates must lie in [-1, 1]")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", np.minimum(y, 1.0))

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def slope(self, x):
        """Piecewise-constant derivative of the linear interpolant."""
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        slopes = np.diff(self.values) / np.diff(self.grid)
        return np.interp(x, mids, slopes)


@dataclass(frozen=True)
class OptimizerConfig:
    grid_size: int = 1001
    gap_qs: float = 0.002
    gap_pb: float = 0.004
    d_s: int = 16
    d_b: int = 6
    q_degrees: tuple = tuple(range(2, 31))
    c_degrees: tuple = tuple(range(1, 101))
    b_degrees: tuple = tuple(range(2, 31))
    p_degrees: tuple = tuple(range(1, 21))
    taper_qs: float = 0.5
    taper_pb: float = 0.05
    refine: int = 10
    tol: float = 1e-4
    max_rounds: int = 200

    def __post_init__(self):
        if self.grid_size < 100:
            raise ValueError("grid_size must be at least 100")
        for name in ("gap_qs", "gap_pb"):
            g = getattr(self, name)
            if not 0 < g <= 0.01:
                raise ValueError(f"{name} must lie in (0, 0.01]")
        if self.d_s < 3:
            raise ValueError("d_s must be at least 3")
        if self.d_b < 2:
            raise ValueError("d_b must be at least 2")

    def grid(self, factor: int = 1) -> np.ndarray:
        return np.linspace(0.0, 1.0, (self.grid_size - 1) * factor + 1)


@dataclass(frozen=True)
class SideInfoMi:
    i_c0: float
    i_c1: float
    i_yc: float


def _lp(cost, a_ub, b_ub, bounds, where, what: str):
    """Solve ``min cost.v`` with ``sum v = 1``; on infeasibility locate the worst row."""
    k = len(cost)
    # back off from the solver's feasibility tolerance so re-checks pass exactly
    b_ub = np.asarray(b_ub, dtype=float)
    b_ub = b_ub - np.minimum(1e-6, 0.5 * np.abs(b_ub))
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=np.ones((1, k)), b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status == 0:
        return res.x
    # phase-1: minimise the largest violation to report where it sits
    a1 = np.hstack([a_ub, -np.ones((a_ub.shape[0], 1))])
    b1 = list(bounds) if isinstance(bounds, list) else [bounds] * k
    p1 = linprog(np.r_[np.zeros(k), 1.0], A_ub=a1, b_ub=b_ub,
                 A_eq=np.r_[np.ones(k), 0.0][None, :], b_eq=[1.0],
                 bounds=b1 + [(0, None)], method="highs")
    point = None
    if p1.status == 0:
        point = float(where[int(np.argmax(a_ub @ p1.x[:k] - b_ub))])
    raise InfeasibleDesignError(f"{what}: no feasible degree distribution", point)


def gap_requirement(target, gap: float, taper: float) -> np.ndarray:
    """Required decoding margin at a point whose next-iteration target is ``target``."""
    return np.minimum(gap, taper * (1.0 - np.asarray(target, dtype=float)))


# ---------------------------------------------------------------- source code

def exit_q(dist: DegreeDistribution, i_q_pri, i_sq):
    """q-node update ``1 - (1 - I_pri) sum_d v_d (1 - I_sq)^(d-1)``."""
    return 1.0 - (1.0 - np.asarray(i_q_pri, dtype=float)) * dist.edge_poly(1.0 - np.asarray(i_sq, dtype=float))


def exit_s(i_sq, d_s: int):
    """Inverse s-node map: the q-to-s MI that yields ``i_sq`` at a degree-``d_s`` check."""
    return np.power(np.asarray(i_sq, dtype=float), 1.0 / (d_s - 1))


def c1_slack(dist: DegreeDistribution, prior: float, cfg: OptimizerConfig, grid) -> np.ndarray:
    g = exit_s(grid, cfg.d_s)
    return exit_q(dist, prior, grid) - g - gap_requirement(g, cfg.gap_qs, cfg.taper_qs)


def optimize_c1(epsilon: float, cfg: OptimizerConfig = OptimizerConfig(), prior_mi: float | None = None):
    """Maximise ``R0 = 1 - (1/d_s) / sum_d v_d/d`` under the q/s decoding-gap constraint.

    ``prior_mi`` defaults to ``1 - epsilon**2`` (relay and destination
    observations combined); pass ``1 - epsilon`` for a single observation.
    """
    prior = 1.0 - epsilon ** 2 if prior_mi is None else prior_mi
    degs = np.array(cfg.q_degrees)
    pts = cfg.grid()[:-1]
    fine = cfg.grid(cfg.refine)[:-1]
    for _ in range(20):
        g = exit_s(pts, cfg.d_s)
        a = (1.0 - prior) * np.power.outer(1.0 - pts, degs - 1)
        b = 1.0 - g - gap_requirement(g, cfg.gap_qs, cfg.taper_qs)
        v = _lp(-1.0 / degs, a, b, (0, None), pts, "source code design")
        dist = DegreeDistribution.from_weights(degs, v)
        slack = c1_slack(dist, prior, cfg, fine)
        bad = fine[slack < -1e-12]
        if bad.size == 0:
            break
        pts = np.union1d(pts, bad)
    else:
        raise InfeasibleDesignError("source code design: cutting planes did not converge")
    return dist, 1.0 - (1.0 / cfg.d_s) / dist.inv_avg


# ------------------------------------------------------------ LDGM quantizer

def ldgm_encoder_fixed_point(dist_c: DegreeDistribution, d_b: int, i_yc: float, i_bc):
    """Prior MI the b-nodes need to hold the quantizer BP at fixed point ``i_bc``.

    Negative values mean the fixed point is unreachable.
    """
    x = np.asarray(i_bc, dtype=float)
    i_cb = i_yc * dist_c.edge_poly(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        pri = 1.0 - (1.0 - x) / np.power(1.0 - i_cb, d_b - 1)
    return np.where(x >= 1.0, 1.0, pri)


def monotonicity_violation(dist_c: DegreeDistribution, d_b: int, i_yc: float, grid) -> float:
    """Largest decrease of the fixed-point curve between consecutive grid points."""
    pri = ldgm_encoder_fixed_point(dist_c, d_b, i_yc, grid)
    return float(max(0.0, -np.min(np.diff(pri))))


@dataclass(frozen=True)
class LdgmDesign:
    dist: DegreeDistribution
    rate: float
    i_yc: float
    monotonicity_violation: float


def optimize_ldgm(epsilon: float, cfg: OptimizerConfig = OptimizerConfig(), enforce_monotone: bool = False) -> LdgmDesign:
    """Minimise ``R_b = 2 / (d_b sum_d v_d/d)`` with a nonnegative fixed-point curve.

    Nonnegativity is the linear constraint ``I_cb <= 1 - (1 - I_bc)^(1/(d_b-1))``.
    With ``enforce_monotone`` the derivative condition
    ``(d_b-1)(1-x) I_cb' + I_cb <= 1`` is added on the grid as well; at the
    default operating point this makes the program infeasible, so it is off
    by default and the violation is reported instead.
    """
    i_yc = 1.0 - 0.5 * epsilon
    d_b = cfg.d_b
    degs = np.array(cfg.c_degrees)
    pts = cfg.grid()
    fine = cfg.grid(cfg.refine)

    def rows(x):
        p = np.power.outer(x, degs - 1)
        a = [i_yc * p]
        b = [1.0 - np.power(1.0 - x, 1.0 / (d_b - 1))]
        if enforce_monotone:
            dp = (degs - 1) * np.power.outer(x, np.maximum(degs - 2, 0))
            a.append(i_yc * ((d_b - 1) * (1.0 - x)[:, None] * dp + p))
            b.append(np.ones_like(x))
        return np.vstack(a), np.concatenate(b), np.concatenate([x] * len(a))

    for _ in range(20):
        a, b, where = rows(pts)
        v = _lp(-1.0 / degs, a, b, (0, None), where, "quantizer design")
        dist = DegreeDistribution.from_weights(degs, v)
        pri = ldgm_encoder_fixed_point(dist, d_b, i_yc, fine)
        bad = fine[pri < -1e-12]
        if bad.size == 0:
            break
        pts = np.union1d(pts, bad)
    else:
        raise InfeasibleDesignError("quantizer design: cutting planes did not converge")
    viol = monotonicity_violation(dist, d_b, i_yc, fine)
    if enforce_monotone and viol > 1e-6:
        raise InfeasibleDesignError("quantizer design: monotone fixed-point curve not reached")
    return LdgmDesign(dist, 2.0 / (d_b * dist.inv_avg), i_yc, viol)


def _entropy(p) -> float:
    q = p[p > 0]
    return float(-np.sum(q * np.log2(q)))


def _cond_mi(joint: np.ndarray, a: tuple, b: tuple, cond: tuple) -> float:
    """``I(A; B | C)`` for axis groups of a joint pmf array."""
    axes = set(range(joint.ndim))

    def h(keep):
        drop = tuple(sorted(axes - set(keep)))
        return _entropy(joint.sum(axis=drop).ravel())

    return h(a + cond) + h(b + cond) - h(a + b + cond) - h(cond)


def side_info_mi(epsilon: float) -> SideInfoMi:
    """MI between a c-bit and the destination observation, by enumeration.

    The relay symbol maps to the dithered pair ``a = c XOR v`` as
    0 -> (0,0), 1 -> (0,1), E -> (1,u) with ``u`` a uniform don't-care bit;
    the dither ``v`` is uniform and known to the decoder. ``i_c0`` averages
    ``I(c_j; y_d | v)`` over the two bit positions; ``i_c1`` averages
    ``I(c_j; y_d | c_other, v)``.
    """
    tab = joint_table(ChannelParams(epsilon)).probabilities
    # axes: c1, c2, y_d, v1, v2
    joint = np.zeros((2, 2, 3, 2, 2))
    for x_s, y_d, y_r, u, v1, v2 in itertools.product((0, 1), range(3), range(3), (0, 1), (0, 1), (0, 1)):
        p = 0.5 * tab[x_s][y_d, y_r] * 0.5 * 0.25
        if p == 0.0:
            continue
        a = (1, u) if y_r == ERASED else (0, y_r)
        joint[a[0] ^ v1, a[1] ^ v2, y_d, v1, v2] += p
    i_c0 = 0.5 * (_cond_mi(joint, (0,), (2,), (3, 4)) + _cond_mi(joint, (1,), (2,), (3, 4)))
    i_c1 = 0.5 * (_cond_mi(joint, (0,), (2,), (1, 3, 4)) + _cond_mi(joint, (1,), (2,), (0, 3, 4)))
    return SideInfoMi(i_c0=i_c0, i_c1=i_c1, i_yc=1.0 - 0.5 * epsilon)


def ldgm_decoder_ebp_parametric(dist_c: DegreeDistribution, d_b: int, si: SideInfoMi, i_bc):
    """``(I_bc,pri, I_bc,ext)`` at the b-to-c MI values ``i_bc``."""
    x = np.asarray(i_bc, dtype=float)
    xd = np.power.outer(x, dist_c.degrees)
    i_yc_d = si.i_c0 * (1.0 - xd) + si.i_c1 * xd
    i_cb = (i_yc_d * np.power.outer(x, dist_c.degrees - 1)) @ dist_c.fractions
    ext = 1.0 - np.power(1.0 - i_cb, d_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        pri = 1.0 - (1.0 - x) / np.power(1.0 - i_cb, d_b - 1)
    pri = np.where(x >= 1.0, 1.0, pri)
    return pri, ext


def ldgm_decoder_ebp(dist_c: DegreeDistribution, d_b: int, si: SideInfoMi, grid, density: int = 20001) -> ExitCurve:
    """Decoder-side EBP curve ``I_bc,pri -> I_bc,ext`` sampled at ``grid`` abscissae.

    The curve is traced on a dense parameter sweep and interpolated; a
    non-monotone prior coordinate has no single-valued resampling and is
    rejected.
    """
    param = np.linspace(0.0, 1.0, density)
    pri, ext = ldgm_decoder_ebp_parametric(dist_c, d_b, si, param)
    if np.any(np.diff(pri) <= 0):
        raise ValueError("EBP prior coordinate is not strictly increasing")
    g = np.asarray(grid, dtype=float)
    return ExitCurve(g, np.interp(g, pri, ext), ("I_bc_pri", "I_bc_ext"))


# ------------------------------------------------------- binning LDPC layer

def _rho(v_pd: DegreeDistribution, z):
    return v_pd.edge_poly(z)


def _rho_inverse(v_pd: DegreeDistribution, target, iters: int = 60, lower: float = 0.0):
    """Vectorized bisection for ``rho(z) = target`` on ``[lower, 1]``."""
    t = np.asarray(target, dtype=float)
    lo = np.full_like(t, lower)
    hi = np.ones_like(t)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = _rho(v_pd, mid) < t
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return 0.5 * (lo + hi)


def _node_polys(b_degrees, lam, u):
    """Node-perspective ``L(u)``, ``L'(u)`` and average degree."""
    d = np.asarray(b_degrees, dtype=float)
    lm = np.power.outer(u, d)
    lpm = d * np.power.outer(u, d - 1)
    return lm, lpm, float(d @ lam)


def ldpc_part_state(v_bd: DegreeDistribution, ebp_ldgm: ExitCurve, y, shift: float = 0.0):
    """One sweep of the binning layer at p-to-b MI ``y``.

    Returns ``(x, I_bp)``: ``x = 1 - L(1-y)`` is what the b-nodes hand to the
    quantizer layer and ``I_bp`` is the b-to-p MI once the quantizer layer
    answers with ``F(x) - shift``.
    """
    y = np.asarray(y, dtype=float)
    lam = v_bd.node_fractions()
    lm, lpm, avg = _node_polys(v_bd.degrees, lam, 1.0 - y)
    x = 1.0 - lm @ lam
    f = ebp_ldgm(x) - shift
    return x, 1.0 - (1.0 - f) * (lpm @ lam) / avg


def c2_slacks(v_bd, v_pd, ebp_ldgm, cfg: OptimizerConfig, y):
    """Progress and curve-margin slacks of the binning layer on ``y`` (excluding 1)."""
    y = np.asarray(y, dtype=float)
    _, ibp = ldpc_part_state(v_bd, ebp_ldgm, y)
    _, ibp_m = ldpc_part_state(v_bd, ebp_ldgm, y, shift=cfg.gap_pb / 2)
    prog = _rho(v_pd, ibp) - y - gap_requirement(y, cfg.gap_pb, cfg.taper_pb)
    marg = _rho(v_pd, ibp_m) - y
    return prog, marg


def ldpc_part_ebp(v_bd: DegreeDistribution, v_pd: DegreeDistribution, grid, density: int = 20001) -> ExitCurve:
    """Binning-layer EBP curve on the shared axes ``I_bp,ext -> I_bp,pri``.

    At check MI ``y`` the b-nodes emit ``x = 1 - L(1-y)`` and, for ``y`` to be a
    fixed point, need prior ``1 - (1 - rho^{-1}(y)) / lambda(1-y)``. With
    degree-1 checks ``rho^{-1}`` is negative near the origin and so is the
    required prior. The endpoint ``y = 1`` uses the limit
    ``1 - 1/(rho'(1) lambda'(0))``.
    """
    if v_bd.degrees[0] < 2:
        raise ValueError("endpoint limit needs b-degrees of at least 2")
    y = np.linspace(0.0, 1.0, density)[:-1]
    lam = v_bd.node_fractions()
    lm, lpm, avg = _node_polys(v_bd.degrees, lam, 1.0 - y)
    x = 1.0 - lm @ lam
    small_lam = (lpm @ lam) / avg
    pri = 1.0 - (1.0 - _rho_inverse(v_pd, y, lower=-1.0)) / small_lam
    rho_p1 = float(np.sum(v_pd.fractions * (v_pd.degrees - 1)))
    lam_p0 = 2.0 * lam[v_bd.degrees == 2].sum() / avg
    end = 1.0 - 1.0 / (rho_p1 * lam_p0) if rho_p1 * lam_p0 > 0 else 0.0
    x = np.r_[x, 1.0]
    pri = np.r_[pri, end]
    g = np.asarray(grid, dtype=float)
    return ExitCurve(g, np.clip(np.interp(g, x, pri), -1.0, 1.0), ("I_bp_ext", "I_bp_pri"))


@dataclass(frozen=True)
class LdpcPartDesign:
    v_bd: DegreeDistribution
    v_pd: DegreeDistribution
    rate: float
    rounds: int = 0
    history: tuple = field(default_factory=tuple)


def binning_rate(r_b: float, v_bd: DegreeDistribution, v_pd: DegreeDistribution) -> float:
    """``t/n``: ``m`` b-nodes carry ``m / sum(v_bd/d)`` edges, each p-check takes ``1 / sum(v_pd/d)``."""
    return r_b * v_pd.inv_avg / v_bd.inv_avg


def _vpd_step(v_bd, ebp, cfg, y):
    degs = np.array(cfg.p_degrees)
    _, ibp = ldpc_part_state(v_bd, ebp, y)
    _, ibp_m = ldpc_part_state(v_bd, ebp, y, shift=cfg.gap_pb / 2)
    a = -np.vstack([np.power.outer(ibp, degs - 1), np.power.outer(ibp_m, degs - 1)])
    b = -np.r_[y + gap_requirement(y, cfg.gap_pb, cfg.taper_pb), y]
    v = _lp(1.0 / degs, a, b, (0, None), np.r_[y, y], "binning layer design")
    return DegreeDistribution.from_weights(degs, v)


def _lam_step(v_bd, v_pd, ebp, cfg, y, delta):
    """Trust-region LP on node fractions with the quantizer curve linearized."""
    degs = np.array(cfg.b_degrees)
    lam_k = np.zeros(len(degs))
    pos = np.searchsorted(degs, v_bd.degrees)
    lam_k[pos] = v_bd.node_fractions()
    u = 1.0 - y
    lm, lpm, _ = _node_polys(degs, lam_k, u)
    l_k = lm @ lam_k
    lp_k = lpm @ lam_k
    x_k = 1.0 - l_k
    fp = ebp.slope(x_k)
    a, b = [], []
    for shift, tgt in ((0.0, y + gap_requirement(y, cfg.gap_pb, cfg.taper_pb)), (cfg.gap_pb / 2, y)):
        tau = _rho_inverse(v_pd, np.minimum(tgt, 1.0))
        f_k = ebp(x_k) - shift
        a.append((1.0 - f_k)[:, None] * lpm + (fp * lp_k)[:, None] * lm - (1.0 - tau)[:, None] * degs[None, :])
        b.append(fp * lp_k * l_k)
    bounds = [(max(0.0, w - delta), min(1.0, w + delta)) for w in lam_k]
    res = linprog(degs.astype(float), A_ub=np.vstack(a), b_ub=np.concatenate(b) - 1e-6,
                  A_eq=np.ones((1, len(degs))), b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return DegreeDistribution.from_node_fractions(degs, np.clip(res.x, 0, None))


def optimize_c2_ldpc(ebp_ldgm: ExitCurve, cfg: OptimizerConfig = OptimizerConfig(), r_b: float = 1.0,
                     start: DegreeDistribution | None = None) -> LdpcPartDesign:
    """Minimise the binning rate ``R_p`` against a fixed quantizer-layer EBP curve.

    Alternates an exact LP over ``v_pd`` (with ``v_bd`` fixed) and a
    trust-region sequential LP over the b-node fractions (with ``v_pd`` fixed),
    accepting a b-step only if the exact constraints still hold. Stops when
    ``R_p`` improves by less than ``cfg.tol``. Every grid point must show
    decoding progress ``rho(I_bp) >= y + gap`` and the two EBP curves must be
    vertically separated by ``gap/2``.
    """
    v_bd = start if start is not None else DegreeDistribution.regular(min(d for d in cfg.b_degrees if d >= 2))
    y = cfg.grid()[:-1]
    fine = cfg.grid(cfg.refine)[:-1]
    v_pd = _vpd_step(v_bd, ebp_ldgm, cfg, y)
    rate = binning_rate(r_b, v_bd, v_pd)
    history = [rate]
    rounds = 0
    for rounds in range(1, cfg.max_rounds + 1):
        step = None
        for delta in (0.05, 0.02, 0.005):
            cand = _lam_step(v_bd, v_pd, ebp_ldgm, cfg, y, delta)
            if cand is None:
                continue
            prog, marg = c2_slacks(cand, v_pd, ebp_ldgm, cfg, y)
            if min(prog.min(), marg.min()) >= -1e-9:
                step = cand
                break
        if step is None:
            break
        try:
            new_pd = _vpd_step(step, ebp_ldgm, cfg, y)
        except InfeasibleDesignError:
            break
        new_rate = binning_rate(r_b, step, new_pd)
        if new_rate > rate - cfg.tol:
            if new_rate < rate:
                v_bd, v_pd, rate = step, new_pd, new_rate
                history.append(rate)
            break
        v_bd, v_pd, rate = step, new_pd, new_rate
        history.append(rate)
    else:
        raise StallError("binning layer alternation did not settle")
    # cutting planes on the fine grid, v_bd held fixed
    for _ in range(20):
        prog, marg = c2_slacks(v_bd, v_pd, ebp_ldgm, cfg, fine)
        bad = fine[(prog < -1e-12) | (marg < -1e-12)]
        if bad.size == 0:
            break
        y = np.union1d(y, bad)
        v_pd = _vpd_step(v_bd, ebp_ldgm, cfg, y)
    else:
        raise InfeasibleDesignError("binning layer design: cutting planes did not converge")
    rate = binning_rate(r_b, v_bd, v_pd)
    return LdpcPartDesign(v_bd, v_pd, rate, rounds, tuple(history))


# -------------------------------------------------------------------- export

def export_curve(curve: ExitCurve, sink, label: str | None = None) -> None:
    """Write ``x,y,label`` CSV rows with 12 significant digits."""
    name = label if label is not None else "/".join(curve.labels)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["x", "y", "label"])
    for x, y in zip(curve.grid, curve.values):
        writer.writerow([f"{x:.12g}", f"{y:.12g}", name])


def read_curve(source) -> ExitCurve:
    reader = csv.reader(line for line in source if not line.startswith("#"))
    header = next(reader, None)
    if header != ["x", "y", "label"]:
        raise ValueError(f"unexpected curve header {header!r}")
    xs, ys, labels = [], [], set()
    for row in reader:
        if not row:
            continue
        xs.append(float(row[0]))
        ys.append(float(row[1]))
        labels.add(row[2])
    label = labels.pop() if len(labels) == 1 else "x/y"
    parts = tuple(label.split("/")) if "/" in label else (label, label)
    return ExitCurve(np.array(xs), np.array(ys), parts)
