"""``cfrelay`` command line: design, build, simulate, chart.

Every command reads a flat ``key = value`` config file. Outputs land in
``out_dir`` (relative paths resolve against the config file's directory) and
start with a comment line carrying the hash of the resolved config, so reruns
produce byte-identical files.

Exit codes: 0 success, 1 usage or config error, 2 infeasible design,
3 simulation hard failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from .channel import ChannelParams, reference_rates
from .design import (
    cf_design_from_stored,
    design_cf,
    design_df,
    load_design,
    save_design,
)
from .ensemble import InfeasibleDesignError, OptimizerConfig, StallError, binning_rate, export_curve
from .graph import InstanceParseError, InstanceVersionError, instantiate_c1, instantiate_c2, load_instance, save_instance
from .sim import SimConfig, monte_carlo, report_json, write_blocks_csv, write_summary_csv

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SIM = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float = 0.5
    n: int = 10000
    d_s: int = 16
    d_b: int = 6
    df_d_s: int = 8
    gap_qs: float = 0.002
    gap_pb: float = 0.004
    taper_qs: float = 0.5
    taper_pb: float = 0.05
    grid_size: int = 1001
    graph_seed: int = 7
    seed: int = 1
    trials: int = 20
    modes: str = "CF,DF"
    max_iters: int = 600
    out_dir: str = "out"

    def validate(self):
        checks = [
            (0.0 <= self.epsilon < 1.0, "epsilon must lie in [0, 1)"),
            (self.n >= 100, "n must be at least 100"),
            (self.d_s >= 3 and self.df_d_s >= 3, "check degrees must be at least 3"),
            (self.d_b >= 2, "d_b must be at least 2"),
            (0 < self.gap_qs <= 0.01 and 0 < self.gap_pb <= 0.01, "gaps must lie in (0, 0.01]"),
            (self.taper_qs > 0 and self.taper_pb > 0, "tapers must be positive"),
            (self.grid_size >= 100, "grid_size must be at least 100"),
            (self.graph_seed >= 0 and self.seed >= 0, "seeds must be nonnegative"),
            (self.trials >= 1, "trials must be at least 1"),
            (self.max_iters >= 1, "max_iters must be at least 1"),
            (set(self.mode_list) <= {"CF", "DF"} and self.mode_list, "modes must list CF and/or DF"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def mode_list(self) -> list:
        return [m.strip().upper() for m in self.modes.split(",") if m.strip()]

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(grid_size=self.grid_size, gap_qs=self.gap_qs, gap_pb=self.gap_pb, d_s=self.d_s,
                               d_b=self.d_b, taper_qs=self.taper_qs, taper_pb=self.taper_pb)

    def canonical(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)!r}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


PAPER_SCALE = {"n": 100000, "trials": 10}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str, where: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: {key} expects {kind}, got {raw!r}") from None


def parse_config(text: str, overrides=(), paper_scale: bool = False) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment); ``overrides`` win over the file."""
    values = dict(PAPER_SCALE) if paper_scale else {}
    items = []
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if body:
            items.append((body, f"line {no}"))
    items += [(o, f"override {o!r}") for o in overrides]
    for body, where in items:
        if "=" not in body:
            raise ConfigError(f"{where}: expected key = value")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{where}: unknown key {key!r}")
        values[key] = _convert(key, raw, where)
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


# ------------------------------------------------------------------ helpers

class _Ctx:
    def __init__(self, cfg: ExperimentConfig, base: Path, out=sys.stdout):
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir) if Path(cfg.out_dir).is_absolute() else base / cfg.out_dir
        self.out = out
        self.header = f"# cfrelay {__version__} config-sha256={cfg.digest()}\n"

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write(self, name: str, fill) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="") as fh:
            fh.write(self.header)
            fill(fh)
        return p

    def say(self, text: str = ""):
        print(text, file=self.out)


class _Refused(Exception):
    """Diagnostic for exit status 1 raised by a command."""


ENSEMBLES = "ensembles.txt"
INSTANCES = {"c1_cf": "c1_cf.inst", "c2_cf": "c2_cf.inst", "c1_df": "c1_df.inst"}


def _load_stored(ctx: _Ctx):
    p = ctx.path(ENSEMBLES)
    if not p.exists():
        raise _Refused(f"missing ensembles file {p}; run 'cfrelay design' first")
    with open(p) as fh:
        try:
            return load_design(fh)
        except ValueError as exc:
            raise _Refused(f"{p}: {exc}") from None


def _expected_rates(stored, cfg: ExperimentConfig) -> dict:
    """Rates implied by the stored ensembles; refuse if they disagree with the recorded ones."""
    e, p, r = stored.ensembles, stored.params, stored.rates
    out = {}
    if "cf.v_qd" in e:
        if int(p.get("cf.d_s", -1)) != cfg.d_s or int(p.get("cf.d_b", -1)) != cfg.d_b:
            raise _Refused("ensembles were designed for different d_s/d_b than the config")
        out["cf.R0"] = 1.0 - (1.0 / cfg.d_s) / e["cf.v_qd"].inv_avg
        out["cf.R_b"] = 2.0 / (cfg.d_b * e["cf.v_cd"].inv_avg)
        out["cf.R_p"] = binning_rate(out["cf.R_b"], e["cf.v_bd"], e["cf.v_pd"])
    if "df.v_qd" in e:
        d_s = int(p.get("df.d_s", -1))
        if d_s != cfg.df_d_s:
            raise _Refused("DF ensemble was designed for a different df_d_s than the config")
        out["df.R"] = 1.0 - (1.0 / d_s) / e["df.v_qd"].inv_avg
    for k, v in out.items():
        if k not in r or abs(r[k] - v) > 1e-9:
            raise _Refused(f"recorded rate {k} does not match its ensemble ({r.get(k)} vs {v!r})")
    return out


# ------------------------------------------------------------------ commands

def cmd_design(ctx: _Ctx) -> int:
    cfg = ctx.cfg
    ocfg = cfg.optimizer()
    cf = design_cf(cfg.epsilon, ocfg)
    df = design_df(cfg.epsilon, ocfg, cfg.df_d_s) if "DF" in cfg.mode_list else None
    ctx.write(ENSEMBLES, lambda fh: save_design(fh, cf, df))
    ctx.write("ebp_ldgm.csv", lambda fh: export_curve(cf.ebp_ldgm, fh, "ldgm"))
    curves = cf.curves()
    ctx.write("ebp_ldpc.csv", lambda fh: export_curve(curves["ebp_ldpc"], fh, "ldpc"))
    ref = reference_rates(ChannelParams(cfg.epsilon))
    lines = [
        f"epsilon      {cfg.epsilon:.4f}",
        f"R0           {cf.r0:.6f}   cut-set 1-e^2 = {ref.cutset_bound:.6f}",
        f"R_b          {cf.ldgm.rate:.6f}   floor 2-e = {ref.ldgm_rate_floor:.6f}",
        f"R_p          {cf.ldpc.rate:.6f}   floor H(y_r|y_d) = {ref.h_yr_given_yd:.6f}, H(y_r) = {ref.h_yr:.6f}",
        f"ldgm monotonicity violation {cf.ldgm.monotonicity_violation:.6f}",
    ]
    if df is not None:
        lines.insert(2, f"R_DF         {df.rate:.6f}   DF bound 1-e = {ref.df_bound:.6f}")
    text = "\n".join(lines) + "\n"
    ctx.write("design_report.txt", lambda fh: fh.write(text))
    ctx.say(text.rstrip("\n"))
    return EXIT_OK


def cmd_build(ctx: _Ctx) -> int:
    cfg = ctx.cfg
    stored = _load_stored(ctx)
    expected = _expected_rates(stored, cfg)
    e = stored.ensembles
    built = {}
    if "CF" in cfg.mode_list:
        if "cf.v_qd" not in e:
            raise _Refused("ensembles file has no CF design")
        built["c1_cf"] = instantiate_c1(e["cf.v_qd"], cfg.d_s, cfg.n, cfg.graph_seed)
        built["c2_cf"] = instantiate_c2(e["cf.v_cd"], cfg.d_b, e["cf.v_bd"], e["cf.v_pd"], cfg.n, cfg.graph_seed + 1)
        pairs = [("c1_cf", "R0", "cf.R0"), ("c2_cf", "R_b", "cf.R_b"), ("c2_cf", "R_p", "cf.R_p")]
    else:
        pairs = []
    if "DF" in cfg.mode_list:
        if "df.v_qd" not in e:
            raise _Refused("ensembles file has no DF design")
        built["c1_df"] = instantiate_c1(e["df.v_qd"], cfg.df_d_s, cfg.n, cfg.graph_seed + 2)
        pairs.append(("c1_df", "R0", "df.R"))
    for name, key, ref in pairs:
        if abs(built[name].rates[key] - expected[ref]) > 1e-9:
            raise _Refused(f"instance {name} rate {key} disagrees with the ensemble design")
    for name, inst in built.items():
        ctx.write(INSTANCES[name], lambda fh, inst=inst: save_instance(inst, fh))
        g = ", ".join(f"{k}: {v.n_left}x{v.n_right}, {v.edge_count} edges" for k, v in sorted(inst.graphs.items()))
        ctx.say(f"{name}  n={inst.n}  {g}")
    return EXIT_OK


def _load_inst(ctx: _Ctx, name: str):
    p = ctx.path(INSTANCES[name])
    if not p.exists():
        raise _Refused(f"missing instance file {p}; run 'cfrelay build' first")
    with open(p) as fh:
        try:
            inst = load_instance(fh)
        except (InstanceParseError, InstanceVersionError) as exc:
            raise _Refused(f"{p}: {exc}") from None
    if inst.n != ctx.cfg.n:
        raise _Refused(f"{p} has n={inst.n} but the config asks for n={ctx.cfg.n}")
    return inst


def cmd_simulate(ctx: _Ctx, jobs: int = 1) -> int:
    cfg = ctx.cfg
    header = {"config_sha256": cfg.digest(), "version": __version__}
    rows = []
    hard = 0
    for mode in cfg.mode_list:
        if mode == "CF":
            c1, c2 = _load_inst(ctx, "c1_cf"), _load_inst(ctx, "c2_cf")
        else:
            c1, c2 = _load_inst(ctx, "c1_df"), None
        sim = SimConfig(cfg.epsilon, cfg.n, cfg.trials, mode, c1, c2, cfg.seed, cfg.max_iters)
        agg, blocks = monte_carlo(sim, jobs=jobs, return_blocks=True)
        low = mode.lower()
        ctx.write(f"{low}_report.json", lambda fh: fh.write(report_json(agg, blocks, header)))
        ctx.write(f"{low}_blocks.csv", lambda fh: write_blocks_csv(blocks, fh))
        rows.append((c1.rates["R0"], agg))
        hard += agg.stage_errors
        print(f"{mode}: {agg.trials} blocks in {agg.wall_clock:.1f} s", file=sys.stderr)
    ctx.write("summary.csv", lambda fh: write_summary_csv(rows, fh))
    ctx.say(f"{'protocol':<9}{'rate':>8}{'BER':>12}{'success':>9}{'flips':>9}{'C_rd req':>10}")
    for rate, agg in rows:
        ctx.say(f"{agg.mode:<9}{rate:>8.4f}{agg.mean_ber:>12.3e}{agg.success_fraction:>9.3f}"
                f"{agg.mean_flips:>9.1f}{agg.mean_crd_required:>10.4f}")
    if hard:
        print(f"{hard} block(s) hit a stage error", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def cmd_chart(ctx: _Ctx) -> int:
    stored = _load_stored(ctx)
    _expected_rates(stored, ctx.cfg)
    try:
        cf = cf_design_from_stored(stored, ctx.cfg.optimizer())
    except ValueError as exc:
        raise _Refused(str(exc)) from None
    curves = cf.curves()
    for name, curve in curves.items():
        ctx.write(f"chart/{name}.csv", lambda fh, c=curve, nm=name: export_curve(c, fh, nm))
    gap = curves["ebp_ldgm"].values - curves["ebp_ldpc"].values
    ctx.say(f"wrote {len(curves)} curves with {curves['ebp_ldgm'].grid.size} points each")
    ctx.say(f"min vertical gap ldgm - ldpc: {gap.min():.6f}")
    return EXIT_OK


# ------------------------------------------------------------------ entry

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"cfrelay: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cfrelay", description="Nested LDGM-LDPC compress-and-forward experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in [("design", "optimise degree distributions"), ("build", "sample code instances"),
                           ("simulate", "Monte Carlo CF/DF blocks"), ("chart", "export EBP and EXIT curves")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="key = value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--paper-scale", action="store_true", help="default to n = 100000 and 10 trials")
        if name == "simulate":
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"cfrelay: cannot read config: {exc.strerror}: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(text, args.overrides, args.paper_scale)
    except ConfigError as exc:
        print(f"cfrelay: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ctx = _Ctx(cfg, path.resolve().parent)
    try:
        if args.command == "design":
            return cmd_design(ctx)
        if args.command == "build":
            return cmd_build(ctx)
        if args.command == "simulate":
            if args.jobs < 1:
                raise _Refused("--jobs must be at least 1")
            return cmd_simulate(ctx, args.jobs)
        return cmd_chart(ctx)
    except _Refused as exc:
        print(f"cfrelay: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleDesignError, StallError) as exc:
        print(f"cfrelay: infeasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
