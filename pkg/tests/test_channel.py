import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfrelay.channel import (
    ERASED,
    ChannelParams,
    TernarySymbol,
    binary_entropy,
    broadcast_transmit,
    enumerate_rates,
    joint_table,
    make_rng,
    reference_rates,
)
from oracles import h2


def test_symbol_encoding():
    assert [int(s) for s in TernarySymbol] == [0, 1, 2]
    assert ERASED == 2


@pytest.mark.parametrize("eps", [-0.1, 1.5, float("nan")])
def test_params_reject_out_of_range(eps):
    with pytest.raises(ValueError):
        ChannelParams(eps)


@given(st.floats(0.0, 1.0))
def test_joint_table_is_a_conditional_law(eps):
    tab = joint_table(ChannelParams(eps)).probabilities
    assert tab.shape == (2, 3, 3)
    np.testing.assert_allclose(tab.sum(axis=(1, 2)), 1.0, atol=1e-12)
    # a non-erased symbol never contradicts x_s
    assert tab[0][1, :].sum() == 0 and tab[0][:, 1].sum() == 0
    assert tab[1][0, :].sum() == 0 and tab[1][:, 0].sum() == 0


def test_reference_rates_at_half():
    r = reference_rates(ChannelParams(0.5))
    assert r.cutset_bound == pytest.approx(0.75, abs=1e-12)
    assert r.h_yr_given_yd == pytest.approx(1.25, abs=1e-12)
    assert r.h_yr == pytest.approx(1.5, abs=1e-12)
    assert r.df_bound == pytest.approx(0.5, abs=1e-12)
    assert r.ldgm_rate_floor == pytest.approx(1.5, abs=1e-12)


@given(st.floats(0.0, 1.0))
def test_closed_forms_match_enumeration(eps):
    p = ChannelParams(eps)
    r = reference_rates(p)
    e = enumerate_rates(p)
    assert r.h_yr == pytest.approx(e["h_yr"], abs=1e-10)
    assert r.h_yr_given_yd == pytest.approx(e["h_yr_given_yd"], abs=1e-10)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_matches_oracle(p):
    assert binary_entropy(p) == pytest.approx(h2(p), abs=1e-12)
    assert 0.0 <= binary_entropy(p) <= 1.0


def test_binary_entropy_domain():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    np.testing.assert_allclose(binary_entropy(np.array([0.11, 0.89])), [0.4999, 0.4999], atol=1e-3)
    for bad in (-0.01, 1.01):
        with pytest.raises(ValueError):
            binary_entropy(bad)


def test_transmit_statistics():
    n = 200_000
    rng = make_rng(3)
    x = rng.integers(0, 2, n).astype(np.uint8)
    y_r, y_d = broadcast_transmit(x, ChannelParams(0.5), rng)
    er, ed = y_r == ERASED, y_d == ERASED
    assert abs(er.mean() - 0.5) < 0.005 and abs(ed.mean() - 0.5) < 0.005
    # independent links: joint erasure close to eps^2
    assert abs((er & ed).mean() - 0.25) < 0.005
    assert np.array_equal(y_r[~er], x[~er]) and np.array_equal(y_d[~ed], x[~ed])


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_transmit_is_seeded(seed, eps):
    x = make_rng(seed).integers(0, 2, 64).astype(np.uint8)
    p = ChannelParams(eps, seed=seed)
    a = broadcast_transmit(x, p)
    b = broadcast_transmit(x, p)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_transmit_extremes():
    x = np.array([0, 1, 1, 0], dtype=np.uint8)
    y_r, y_d = broadcast_transmit(x, ChannelParams(0.0))
    assert np.array_equal(y_r, x) and np.array_equal(y_d, x)
    y_r, y_d = broadcast_transmit(x, ChannelParams(1.0))
    assert np.all(y_r == ERASED) and np.all(y_d == ERASED)
    with pytest.raises(ValueError):
        broadcast_transmit(np.array([], dtype=np.uint8), ChannelParams(0.5))
