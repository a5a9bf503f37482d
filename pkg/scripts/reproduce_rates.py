"""Design the CF and DF ensembles at one erasure probability and print the rates."""

import argparse
import time

from cfrelay.channel import ChannelParams, reference_rates
from cfrelay.design import design_cf, design_df, desk_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.5)
    args = ap.parse_args()
    ref = reference_rates(ChannelParams(args.epsilon))
    print(f"cut-set {ref.cutset_bound:.4f}  DF bound {ref.df_bound:.4f}  "
          f"H(y_r|y_d) {ref.h_yr_given_yd:.4f}  H(y_r) {ref.h_yr:.4f}")
    for label, cfg in (("default", None), ("desk", desk_config())):
        t0 = time.perf_counter()
        d = design_cf(args.epsilon) if cfg is None else design_cf(args.epsilon, cfg)
        r = d.rates
        print(f"CF {label:<8} R0 {r['R0']:.4f}  R_b {r['R_b']:.4f}  R_p {r['R_p']:.4f}  "
              f"({time.perf_counter() - t0:.1f} s)")
    df = design_df(args.epsilon)
    print(f"DF d_s={df.d_s}   R {df.rate:.4f}")


if __name__ == "__main__":
    main()
