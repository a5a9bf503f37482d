"""Full-length CF and DF run (n = 1e5) through the command-line pipeline.

Writes a config next to the outputs and runs design, build, simulate and
chart with the paper-scale defaults. Expect 30 to 90 s per CF block and
about 3 s per DF block on one core.
"""

import argparse
import sys
from pathlib import Path

from cfrelay.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="paper_scale")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--desk-margin", action="store_true", help="use the larger binning margin")
    args = ap.parse_args()
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"trials = {args.trials}", "out_dir = out"]
    if args.desk_margin:
        lines += ["gap_pb = 0.01", "taper_pb = 0.5"]
    cfg = root / "experiment.cfg"
    cfg.write_text("\n".join(lines) + "\n")
    for cmd in (["design"], ["build"], ["simulate", "--jobs", str(args.jobs)], ["chart"]):
        code = cli([cmd[0], str(cfg), "--paper-scale", *cmd[1:]])
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
