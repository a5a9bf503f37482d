"""Monte Carlo harness for compress-and-forward and the decode-and-forward baseline.

A block draws a message, encodes it with the source code, sends it over the
broadcast channel and runs the relay and destination pipelines. Each block
derives its generators from one block seed, so a block is reproducible in
isolation and the aggregate does not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .channel import ERASED, ChannelParams, binary_entropy, broadcast_transmit, make_rng, reference_rates
from .graph import CodeInstance, instantiate_c1, instantiate_c2
from .ldpc import IntegrityError, SystematicEncoder, build_systematic_encoder, destination_decode, peel_decode
from .relay import DitherSequence, compress, reconstruct_yr

MODES = ("CF", "DF")


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Experiment knobs. ``c1`` is the source code; CF also needs the nested code ``c2``."""

    epsilon: float
    n: int
    trials: int = 1
    mode: str = "CF"
    c1: CodeInstance | None = None
    c2: CodeInstance | None = None
    seed: int = 0
    max_iters: int = 600

    def __post_init__(self):
        ChannelParams(self.epsilon)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 100:
            raise ValueError("n must be at least 100")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.c1 is None or self.c1.kind != "C1" or self.c1.n != self.n:
            raise ValueError("a C1 instance of length n is required")
        if self.mode == "CF" and (self.c2 is None or self.c2.kind != "C2" or self.c2.n != self.n):
            raise ValueError("CF mode needs a C2 instance of length n")


@dataclass
class BlockReport:
    block_seed: int
    mode: str
    ber: float
    bit_errors: int
    message_bits: int
    yr_recovered: bool
    false_convergence: bool
    flips: int
    iters_ldgm: int
    iters_ldpc: int
    crd_required: float
    rate_ok: bool
    error: str = ""


@dataclass
class AggregateReport:
    mode: str
    trials: int
    mean_ber: float
    ber_p50: float
    ber_p90: float
    ber_max: float
    success_fraction: float
    mean_ber_success: float
    zero_ber_fraction_success: float
    mean_flips: float
    mean_crd_required: float
    false_convergences: int
    stage_errors: int
    rate_violations: int
    wall_clock: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_clock")
        return d


def required_crd(r_p: float, flips: int, n: int) -> float:
    """Relay-destination rate for the syndrome plus the flip positions: ``R_p + 2 H2(flips / 2n)``."""
    if not 0 <= flips <= 2 * n:
        raise ValueError("flips must lie in [0, 2n]")
    return float(r_p) + 2.0 * binary_entropy(flips / (2.0 * n))


# per-process cache; building the encoder triangulates the whole check matrix
_ENCODERS: list = []


def _encoder(inst: CodeInstance) -> SystematicEncoder:
    for key, enc in _ENCODERS:
        if key is inst:
            return enc
    enc = build_systematic_encoder(inst)
    _ENCODERS[:] = _ENCODERS[-3:] + [(inst, enc)]
    return enc


def _block_streams(block_seed: int):
    msg, chan, dither = np.random.SeedSequence(block_seed).spawn(3)
    return make_rng(msg), make_rng(chan), int(dither.generate_state(1, np.uint32)[0])


def _rate_ok(cfg: SimConfig) -> bool:
    ref = reference_rates(ChannelParams(cfg.epsilon))
    r0 = _encoder(cfg.c1).message_length / cfg.n
    ok = r0 <= ref.cutset_bound + 0.01
    if cfg.mode == "CF":
        ok = ok and cfg.c2.t / cfg.n >= ref.h_yr_given_yd - 0.01
    return bool(ok)


def _count_errors(w, w_hat) -> int:
    return int(np.count_nonzero(np.asarray(w) != np.asarray(w_hat)))


def run_cf_block(cfg: SimConfig, block_seed: int) -> BlockReport:
    """Source encode, broadcast, relay compress, reconstruct ``y_r``, decode the message.

    The destination uses any reconstruction that meets every constraint; if
    that reconstruction contradicts the source code, or none was found, it
    decodes from its own observation. ``yr_recovered`` is scored against the
    relay's true observation, so a consistent but wrong reconstruction counts
    as a false convergence.
    """
    rng_msg, rng_chan, dither_seed = _block_streams(block_seed)
    enc = _encoder(cfg.c1)
    w = rng_msg.integers(0, 2, enc.message_length, dtype=np.uint8)
    w_hat = np.zeros_like(w)
    rep = dict(flips=0, iters_ldgm=0, iters_ldpc=0, recovered=False, false_conv=False, error="")
    r_p = cfg.c2.t / cfg.n
    crd = r_p
    stage = "encode"
    try:
        x = enc.encode(w)
        stage = "channel"
        y_r, y_d = broadcast_transmit(x, ChannelParams(cfg.epsilon), rng_chan)
        y_rec = np.full(cfg.n, ERASED, dtype=np.uint8)
        if cfg.epsilon == 0.0:
            # y_r coincides with y_d: nothing to describe
            y_rec = y_d.copy()
            rep["recovered"] = True
        else:
            stage = "relay"
            v = DitherSequence.from_seed(dither_seed, cfg.n)
            payload, _ = compress(cfg.c2, y_r, v)
            rep["flips"] = int(payload.zeta.size)
            crd = required_crd(r_p, rep["flips"], cfg.n)
            stage = "reconstruct"
            res = reconstruct_yr(cfg.c2, payload, y_d, v, cfg.epsilon, max_iters=cfg.max_iters)
            rep["iters_ldgm"] = res.iterations
            if res.success:
                y_rec = res.y_r
                if np.array_equal(res.y_r, y_r):
                    rep["recovered"] = True
                else:
                    rep["false_conv"] = True
        stage = "destination"
        try:
            dest = destination_decode(cfg.c1, enc, y_d, y_rec)
        except IntegrityError:
            # the reconstruction contradicts the source code: decode from y_d alone
            dest = destination_decode(cfg.c1, enc, y_d, np.full(cfg.n, ERASED, dtype=np.uint8))
        rep["iters_ldpc"] = dest.iterations
        w_hat = dest.message
    except Exception as exc:  # recorded, never raised
        rep["error"] = f"{stage}: {type(exc).__name__}: {exc}"
    errors = _count_errors(w, w_hat)
    return BlockReport(int(block_seed), "CF", errors / w.size, errors, int(w.size), rep["recovered"],
                       rep["false_conv"], rep["flips"], rep["iters_ldgm"], rep["iters_ldpc"], float(crd),
                       _rate_ok(cfg), rep["error"])


def run_df_block(cfg: SimConfig, block_seed: int) -> BlockReport:
    """The relay decodes the message from ``y_r`` alone and forwards it when it succeeds.

    ``yr_recovered`` reports relay decoding success; on failure the
    destination decodes from ``y_d`` alone.
    """
    rng_msg, rng_chan, _ = _block_streams(block_seed)
    enc = _encoder(cfg.c1)
    w = rng_msg.integers(0, 2, enc.message_length, dtype=np.uint8)
    w_hat = np.zeros_like(w)
    relay_ok, iters, error = False, 0, ""
    stage = "encode"
    try:
        x = enc.encode(w)
        stage = "channel"
        y_r, y_d = broadcast_transmit(x, ChannelParams(cfg.epsilon), rng_chan)
        stage = "relay"
        res = peel_decode(cfg.c1, y_r, resolve_core=True)
        relay_ok = bool(res.success)
        forwarded = res.word if relay_ok else np.full(cfg.n, ERASED, dtype=np.uint8)
        stage = "destination"
        dest = destination_decode(cfg.c1, enc, y_d, forwarded)
        iters = dest.iterations
        w_hat = dest.message
    except Exception as exc:
        error = f"{stage}: {type(exc).__name__}: {exc}"
    errors = _count_errors(w, w_hat)
    return BlockReport(int(block_seed), "DF", errors / w.size, errors, int(w.size), relay_ok, False, 0, 0,
                       iters, enc.message_length / cfg.n, _rate_ok(cfg), error)


def run_block(cfg: SimConfig, block_seed: int) -> BlockReport:
    return run_cf_block(cfg, block_seed) if cfg.mode == "CF" else run_df_block(cfg, block_seed)


def block_seeds(master_seed: int, trials: int) -> list:
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(trials, np.uint64)]


def aggregate(blocks, mode: str, wall_clock: float = 0.0) -> AggregateReport:
    """Order-independent reduction (blocks are sorted by seed, sums use ``math.fsum``)."""
    blocks = sorted(blocks, key=lambda b: b.block_seed)
    if not blocks:
        raise ValueError("no blocks to aggregate")
    k = len(blocks)
    ber = np.array([b.ber for b in blocks])
    ok = [b for b in blocks if b.yr_recovered]
    return AggregateReport(
        mode=mode,
        trials=k,
        mean_ber=math.fsum(ber) / k,
        ber_p50=float(np.percentile(ber, 50)),
        ber_p90=float(np.percentile(ber, 90)),
        ber_max=float(ber.max()),
        success_fraction=len(ok) / k,
        mean_ber_success=math.fsum(b.ber for b in ok) / len(ok) if ok else float("nan"),
        zero_ber_fraction_success=sum(b.bit_errors == 0 for b in ok) / len(ok) if ok else float("nan"),
        mean_flips=math.fsum(b.flips for b in blocks) / k,
        mean_crd_required=math.fsum(b.crd_required for b in blocks) / k,
        false_convergences=sum(b.false_convergence for b in blocks),
        stage_errors=sum(bool(b.error) for b in blocks),
        rate_violations=sum(not b.rate_ok for b in blocks),
        wall_clock=wall_clock,
    )


_WORKER_CFG = None


def _init_worker(cfg):
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _run_worker(seed):
    return run_block(_WORKER_CFG, seed)


def monte_carlo(cfg: SimConfig, jobs: int = 1, return_blocks: bool = False):
    """Run ``cfg.trials`` blocks, optionally across ``jobs`` processes."""
    start = time.perf_counter()
    seeds = block_seeds(cfg.seed, cfg.trials)
    if jobs <= 1 or cfg.trials == 1:
        blocks = [run_block(cfg, s) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            blocks = list(pool.map(_run_worker, seeds))
    agg = aggregate(blocks, cfg.mode, time.perf_counter() - start)
    return (agg, blocks) if return_blocks else agg


def prepare_cf_instances(design, n: int, graph_seed: int):
    """Source and nested code instances of length ``n`` from a ``CfDesign``."""
    c1 = instantiate_c1(design.v_qd, design.config.d_s, n, graph_seed)
    c2 = instantiate_c2(design.ldgm.dist, design.config.d_b, design.ldpc.v_bd, design.ldpc.v_pd, n, graph_seed + 1)
    return c1, c2


# ------------------------------------------------------------------ reports

BLOCK_FIELDS = [f.name for f in fields(BlockReport)]


def _clean(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def report_json(agg: AggregateReport, blocks=None, header: dict | None = None) -> str:
    """Deterministic JSON (sorted keys, no timing)."""
    doc = {"aggregate": _clean(agg.to_dict())}
    if header:
        doc["config"] = header
    if blocks is not None:
        doc["blocks"] = [asdict(b) for b in sorted(blocks, key=lambda b: b.block_seed)]
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_blocks_csv(blocks, sink) -> None:
    wr = csv.writer(sink, lineterminator="\n")
    wr.writerow(BLOCK_FIELDS)
    for b in sorted(blocks, key=lambda b: b.block_seed):
        wr.writerow([repr(v) if isinstance(v, float) else v for v in asdict(b).values()])


def write_summary_csv(rows, sink) -> None:
    """One row per protocol: mode, designed rate and the aggregate fields."""
    names = ["mode", "designed_rate"] + [k for k in AggregateReport.__dataclass_fields__ if k not in ("mode", "wall_clock")]
    wr = csv.writer(sink, lineterminator="\n")
    wr.writerow(names)
    for rate, agg in rows:
        d = agg.to_dict()
        d["designed_rate"] = rate
        wr.writerow([repr(d[k]) if isinstance(d[k], float) else d[k] for k in names])
