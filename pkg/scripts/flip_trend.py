"""Mean quantizer flip count and flip fraction against block length."""

import argparse

import numpy as np

from cfrelay.channel import ChannelParams, broadcast_transmit, make_rng
from cfrelay.design import design_cf
from cfrelay.graph import instantiate_c2
from cfrelay.relay import DitherSequence, compress


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--blocks", type=int, default=20)
    ap.add_argument("--lengths", type=int, nargs="+", default=[10_000, 30_000, 100_000])
    ap.add_argument("--graph-seed", type=int, default=8)
    args = ap.parse_args()
    d = design_cf(args.epsilon)
    print(f"{'n':>8}{'mean flips':>12}{'flip fraction':>15}")
    for n in args.lengths:
        inst = instantiate_c2(d.ldgm.dist, d.config.d_b, d.ldpc.v_bd, d.ldpc.v_pd, n, args.graph_seed)
        flips = []
        for s in range(args.blocks):
            rng = make_rng(s)
            y_r, _ = broadcast_transmit(rng.integers(0, 2, n).astype(np.uint8), ChannelParams(args.epsilon), rng)
            _, q = compress(inst, y_r, DitherSequence.from_seed(10_000 + s, n))
            flips.append(q.zeta.size)
        m = float(np.mean(flips))
        print(f"{n:>8}{m:>12.1f}{m / (2 * n):>15.2e}", flush=True)


if __name__ == "__main__":
    main()
