"""Binary-erasure broadcast channel and its reference information rates.

The source bit ``x_s`` reaches the relay and the destination through two
independent erasure channels with the same erasure probability. Observations
are ternary and stored as ``uint8`` arrays with ``ERASED == 2``.

The binary entropy uses the standard nonnegative definition
``H2(p) = -p log2 p - (1-p) log2 (1-p)``.

Randomness: every random draw in this package goes through
``numpy.random.Generator`` with the PCG64 bit generator, seeded from integers or
``numpy.random.SeedSequence`` children.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class TernarySymbol(IntEnum):
    ZERO = 0
    ONE = 1
    ERASED = 2


ERASED = int(TernarySymbol.ERASED)
SYMBOLS = (TernarySymbol.ZERO, TernarySymbol.ONE, TernarySymbol.ERASED)


@dataclass(frozen=True)
class ChannelParams:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class JointTable:
    """``probabilities[x_s][y_d, y_r]`` with axes ordered (0, 1, E)."""

    probabilities: np.ndarray

    def given(self, x_s: int) -> np.ndarray:
        return self.probabilities[x_s]


def make_rng(seed) -> np.random.Generator:
    """The repo-wide generator: PCG64 seeded from an int or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def joint_table(params: ChannelParams) -> JointTable:
    e = params.epsilon
    # per-link law of y given x=0 over (0, 1, E)
    link = np.array([1.0 - e, 0.0, e])
    t0 = np.outer(link, link)
    swap = [1, 0, 2]
    t1 = t0[np.ix_(swap, swap)]
    return JointTable(np.stack([t0, t1]))


def broadcast_transmit(x_s, params: ChannelParams, rng: np.random.Generator | None = None):
    """Send ``x_s`` over both links; returns ``(y_r, y_d)``.

    Erasures are drawn independently per position and per link. Without an
    explicit ``rng`` the generator is seeded from ``params.seed``.
    """
    x = np.asarray(x_s, dtype=np.uint8)
    if x.size == 0:
        raise ValueError("x_s must be nonempty")
    if rng is None:
        rng = make_rng(params.seed)
    er = rng.random(x.size) < params.epsilon
    ed = rng.random(x.size) < params.epsilon
    y_r = np.where(er, ERASED, x).astype(np.uint8)
    y_d = np.where(ed, ERASED, x).astype(np.uint8)
    return y_r, y_d


def binary_entropy(p) -> np.ndarray | float:
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ValueError("binary_entropy is defined on [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p_arr * np.log2(p_arr) - (1 - p_arr) * np.log2(1 - p_arr)
    h = np.where((p_arr == 0) | (p_arr == 1), 0.0, h)
    return float(h) if np.ndim(h) == 0 else h


def _entropy(probs) -> float:
    q = np.asarray(probs, dtype=float).ravel()
    q = q[q > 0]
    return float(-np.sum(q * np.log2(q)))


def enumerate_rates(params: ChannelParams) -> dict:
    """H(y_r) and H(y_r|y_d) by summation over the 9-cell joint table."""
    tab = joint_table(params).probabilities
    joint = 0.5 * (tab[0] + tab[1])  # uniform x_s; axes (y_d, y_r)
    h_joint = _entropy(joint)
    h_yd = _entropy(joint.sum(axis=1))
    h_yr = _entropy(joint.sum(axis=0))
    return {"h_yr": h_yr, "h_yr_given_yd": h_joint - h_yd}


@dataclass(frozen=True)
class ReferenceRates:
    df_bound: float
    cutset_bound: float
    h_yr: float
    h_yr_given_yd: float
    ldgm_rate_floor: float


def reference_rates(params: ChannelParams) -> ReferenceRates:
    """Closed forms for a uniform source.

    ``H(y_r) = H2(e) + 1 - e``; given ``y_d`` the relay symbol is uncertain in
    its erasure flag always and in its value only when ``y_d`` is erased, so
    ``H(y_r|y_d) = H2(e) + e(1-e)``.
    """
    e = params.epsilon
    h2 = binary_entropy(e)
    return ReferenceRates(
        df_bound=1.0 - e,
        cutset_bound=1.0 - e * e,
        h_yr=h2 + 1.0 - e,
        h_yr_given_yd=h2 + e * (1.0 - e),
        ldgm_rate_floor=2.0 - e,
    )
