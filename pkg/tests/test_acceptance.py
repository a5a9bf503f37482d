"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import io
import itertools
import time

import numpy as np
import pytest

from cfrelay.channel import ERASED, ChannelParams, broadcast_transmit, enumerate_rates, make_rng, reference_rates
from cfrelay.cli import main
from cfrelay.design import load_design
from cfrelay.ensemble import export_curve, ldgm_decoder_ebp, ldpc_part_ebp, read_curve
from cfrelay.graph import instantiate_c1, instantiate_c2
from cfrelay.ldpc import build_systematic_encoder, peel_decode
from cfrelay.relay import (
    BitConstraint,
    DitherSequence,
    compress,
    map_constraints,
    quantize,
    reconstruct_yr,
    verify_quantization,
)
from cfrelay.sim import SimConfig, monte_carlo, prepare_cf_instances, required_crd
from conftest import random_check_instance
from oracles import dense_peel, gf2_rank, gf2_solve, h2, relay_words, undetermined_bits

DESK_N = 10_000
DESK_BLOCKS = 50
FULL_N = 100_000
FLIP_BLOCKS = 20


def report(capsys, k: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}")
    assert ok, detail


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ------------------------------------------------------------------ fixtures

@pytest.fixture(scope="module")
def desk_runs(desk_design, df_design):
    c1, c2 = prepare_cf_instances(desk_design, DESK_N, 7)
    df_c1 = instantiate_c1(df_design.v_qd, df_design.d_s, DESK_N, 9)
    cf = monte_carlo(SimConfig(0.5, DESK_N, DESK_BLOCKS, "CF", c1, c2, seed=1), return_blocks=True)
    df = monte_carlo(SimConfig(0.5, DESK_N, DESK_BLOCKS, "DF", df_c1, seed=1), return_blocks=True)
    return cf, df


def _mean_flips(inst, blocks: int) -> float:
    n = inst.n
    flips = []
    for s in range(blocks):
        rng = make_rng(s)
        y_r, _ = broadcast_transmit(rng.integers(0, 2, n).astype(np.uint8), ChannelParams(0.5), rng)
        _, q = compress(inst, y_r, DitherSequence.from_seed(10_000 + s, n))
        flips.append(q.zeta.size)
    return float(np.mean(flips))


# ------------------------------------------------------------------ criteria

def test_criterion_1_rates(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("epsilon = 0.5\nd_s = 16\nd_b = 6\n")
    t0 = time.perf_counter()
    code = main(["design", str(cfg)])
    elapsed = time.perf_counter() - t0
    with open(tmp_path / "out" / "ensembles.txt") as fh:
        rates = load_design(fh).rates
    r0, rb, rp = rates["cf.R0"], rates["cf.R_b"], rates["cf.R_p"]
    ok = (code == 0 and 0.727 <= r0 <= 0.757 and 1.500 < rb <= 1.522 and 1.250 < rp <= 1.300
          and elapsed <= 300)
    report(capsys, 1, ok, f"R0={r0:.4f} R_b={rb:.4f} R_p={rp:.4f} in {elapsed:.1f} s")


def test_criterion_2_reference_rates(capsys):
    p = ChannelParams(0.5)
    ref = reference_rates(p)
    enum = enumerate_rates(p)
    ok = (abs(ref.cutset_bound - 0.75) <= 1e-12 and abs(ref.h_yr_given_yd - 1.25) <= 1e-12
          and abs(ref.h_yr - 1.5) <= 1e-12 and abs(enum["h_yr"] - 1.5) <= 1e-12
          and abs(enum["h_yr_given_yd"] - 1.25) <= 1e-12)
    report(capsys, 2, ok, f"cutset={ref.cutset_bound!r} H(y_r|y_d)={ref.h_yr_given_yd!r} "
                          f"H(y_r)={ref.h_yr!r}; summation {enum['h_yr_given_yd']!r}, {enum['h_yr']!r}")


def test_criterion_3_curve_dominance(cf_design, capsys):
    grid = np.linspace(0.0, 1.0, 10_001)
    back = []
    for curve in (ldgm_decoder_ebp(cf_design.ldgm.dist, cf_design.config.d_b, cf_design.side_info, grid),
                  ldpc_part_ebp(cf_design.ldpc.v_bd, cf_design.ldpc.v_pd, grid)):
        buf = io.StringIO()
        export_curve(curve, buf)
        buf.seek(0)
        back.append(read_curve(buf))
    margin = float(np.min(back[0].values - back[1].values))
    need = cf_design.config.gap_pb / 2
    report(capsys, 3, margin >= need, f"min LDGM-LDPC gap {margin:.5f} >= {need:.5f} on 10001 points")


def _peel_agreement(n: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    inst = random_check_instance(n, n // 2, rng)
    h = inst.graphs["qs"].to_dense().T
    enc = build_systematic_encoder(inst)
    x = enc.encode(rng.integers(0, 2, enc.message_length).astype(np.uint8))
    bad = 0
    for pattern in itertools.product((False, True), repeat=n):
        er = np.array(pattern)
        y = np.where(er, ERASED, x).astype(np.uint8)
        res = peel_decode(inst, y)
        w_or, e_or = dense_peel(h, np.where(er, 0, x), er)
        bad += not (np.array_equal(res.word == ERASED, e_or) and np.array_equal(res.word[~e_or], w_or[~e_or]))
        ml = peel_decode(inst, y, resolve_core=True)
        solvable = gf2_rank(h[:, er]) == er.sum() if er.any() else True
        bad += ml.success != solvable
        if ml.success and er.any():
            _, unique, sol = gf2_solve(h[:, er], (h[:, ~er].astype(int) @ x[~er]) % 2)
            bad += not (unique and np.array_equal(ml.word[er], sol))
        known = ml.word != ERASED
        bad += not np.array_equal(np.sort(ml.residual), undetermined_bits(h, er))
        bad += not np.array_equal(ml.word[known], x[known])
    return bad


def _reconstruct_agreement(inst, seed: int) -> tuple:
    n = inst.n
    h = inst.graphs["H"].to_dense().T
    g = inst.graphs["G"].to_dense().T
    rng = make_rng(seed)
    x = rng.integers(0, 2, n).astype(np.uint8)
    bad = unique = 0
    for yd_seed in range(2):
        y_d = np.where(make_rng(yd_seed + 100 * seed).random(n) < 0.5, ERASED, x).astype(np.uint8)
        for mask in range(2 ** n):
            er = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
            y_r = np.where(er, ERASED, x).astype(np.uint8)
            v = DitherSequence.from_seed(mask, n)
            payload, _ = compress(inst, y_r, v)
            truth = relay_words(h, g, payload.p, payload.zeta, y_d, v.bits)
            res = reconstruct_yr(inst, payload, y_d, v, 0.5, max_iters=40)
            bad += tuple(y_r.tolist()) not in truth
            if res.success:
                bad += tuple(res.y_r.tolist()) not in truth
            if len(truth) == 1:
                unique += 1
                bad += not (res.success and np.array_equal(res.y_r, y_r))
    return bad, unique


def test_criterion_4_oracle_equivalence(small_c2, capsys):
    peel_bad = sum(_peel_agreement(12, s) for s in range(2))
    rec_bad = rec_unique = 0
    for s in range(3):
        b, u = _reconstruct_agreement(small_c2(8, s), s)
        rec_bad += b
        rec_unique += u
    q_bad = 0
    for k in range(1000):
        rng = make_rng(k)
        n = int(rng.integers(6, 41))
        inst = small_c2(n, k % 11)
        y_r, _ = broadcast_transmit(rng.integers(0, 2, n).astype(np.uint8), ChannelParams(float(rng.random())), rng)
        cons = map_constraints(y_r, DitherSequence.from_seed(k, n))
        q = quantize(inst, cons)
        forced = cons != BitConstraint.DONT_CARE
        consistent, _, _ = gf2_solve(inst.graphs["G"].to_dense().T[forced], cons[forced])
        q_bad += not verify_quantization(inst, cons, q.b, q.zeta) or (q.zeta.size == 0) != consistent
    ok = peel_bad == 0 and rec_bad == 0 and q_bad == 0
    report(capsys, 4, ok, f"peel mismatches {peel_bad} (n=12, all patterns), reconstruction mismatches "
                          f"{rec_bad} (n=8, {rec_unique} uniquely determined cases), quantizer failures {q_bad}/1000")


def test_criterion_5_flip_fraction(cf_design, capsys):
    d = cf_design
    t0 = time.perf_counter()
    big = instantiate_c2(d.ldgm.dist, d.config.d_b, d.ldpc.v_bd, d.ldpc.v_pd, FULL_N, 8)
    flips_big = _mean_flips(big, FLIP_BLOCKS)
    elapsed = time.perf_counter() - t0
    small = instantiate_c2(d.ldgm.dist, d.config.d_b, d.ldpc.v_bd, d.ldpc.v_pd, DESK_N, 8)
    flips_small = _mean_flips(small, FLIP_BLOCKS)
    frac_big, frac_small = flips_big / (2 * FULL_N), flips_small / (2 * DESK_N)
    ok = flips_big <= 1200 and frac_small > frac_big and elapsed <= 1800
    report(capsys, 5, ok, f"mean flips {flips_big:.1f} at n=1e5 ({FLIP_BLOCKS} blocks, {elapsed:.0f} s); "
                          f"flip fraction {frac_small:.2e} at n=1e4 > {frac_big:.2e} at n=1e5")


def test_criterion_6_desk_cf(desk_runs, capsys):
    (agg, blocks), _ = desk_runs
    ok = (agg.trials == DESK_BLOCKS and agg.success_fraction >= 0.8
          and agg.zero_ber_fraction_success > 0.5 and agg.mean_ber_success <= 1e-3)
    report(capsys, 6, ok, f"y_r exact in {agg.success_fraction:.0%} of {agg.trials} blocks "
                          f"({agg.false_convergences} false convergences); success-block BER zero in "
                          f"{agg.zero_ber_fraction_success:.0%}, mean {agg.mean_ber_success:.2e}")


def test_criterion_7_crd_accounting(capsys):
    crd = required_crd(1.2696, 600, 100_000)
    oracle = 1.2696 + 2 * h2(600 / 200_000)
    ok = abs(crd - 1.3287) <= 1e-3 and abs(crd - oracle) <= 1e-12 and crd < 1.5 and abs(crd - 1.8385) > 0.1
    report(capsys, 7, ok, f"required C_rd {crd:.4f} < H(y_r) = 1.5")


def test_criterion_8_cf_beats_df(cf_design, df_design, desk_runs, capsys):
    (cf, _), (df, _) = desk_runs
    same_order = cf.mean_ber_success <= 1e-3 and df.mean_ber_success <= 1e-3
    ok = cf_design.r0 > df_design.rate and df_design.rate <= 0.5 and same_order
    report(capsys, 8, ok, f"CF rate {cf_design.r0:.4f} > DF rate {df_design.rate:.4f}; success-block BER "
                          f"CF {cf.mean_ber_success:.2e}, DF {df.mean_ber_success:.2e} (n={DESK_N})")


def test_criterion_9_determinism(tmp_path, desk_design, capsys):
    trees = []
    for run, jobs in enumerate((1, 1, 2)):
        root = tmp_path / f"run{run}"
        root.mkdir()
        cfg = root / "exp.cfg"
        cfg.write_text("epsilon = 0.5\nn = 1000\ntrials = 3\nseed = 5\n")
        codes = [main([c, str(cfg)]) for c in ("design", "build", "chart")]
        codes.append(main(["simulate", str(cfg), "--jobs", str(jobs)]))
        trees.append((codes, _files(root)))
    cli_ok = all(c == [0, 0, 0, 0] for c, _ in trees) and trees[0][1] == trees[1][1] == trees[2][1]
    c1, c2 = prepare_cf_instances(desk_design, 2000, 3)
    sim = SimConfig(0.5, 2000, 4, "CF", c1, c2, seed=9)
    runs = [monte_carlo(sim, jobs=j, return_blocks=True) for j in (1, 1, 2)]
    sim_ok = runs[0] == runs[1] == runs[2]
    report(capsys, 9, cli_ok and sim_ok, f"{len(trees[0][1])} output files identical over 3 runs (jobs 1, 1, 2); "
                                         f"Monte Carlo identical over jobs 1, 1, 2")
