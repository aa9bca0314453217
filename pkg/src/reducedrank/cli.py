"""Command-line driver: ``reducedrank {mse-time,mse-rank,ber,complexity}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness.complexity import format_table
from .harness.config import ALGORITHMS, ConfigError, parse_config
from .harness.experiments import (match_fullrank_step, run_ber_vs_symbols, run_mse_vs_rank,
                                  run_mse_vs_symbols)
from .harness.montecarlo import generate_runs
from .harness.plotting import plot_curve
from .harness.report import emit_csv

TITLES = {"mse-time": "MSE versus received symbols", "mse-rank": "MSE versus rank",
          "ber": "BER versus received symbols"}


def _step_override(text: str) -> tuple[str | None, str]:
    if "=" in text:
        alg, val = text.split("=", 1)
        return alg.strip(), val.strip()
    return None, text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reducedrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mse-time", "mse-rank", "ber", "complexity"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seed", type=int, help="base seed; run j uses seed + j")
        p.add_argument("--runs", type=int, help="number of Monte Carlo runs")
        p.add_argument("--symbols", type=int, help="symbols per run")
        p.add_argument("--out", type=Path, help="CSV output path")
        p.add_argument("--mu", action="append", default=[], metavar="[ALG=]MU",
                       help="step size; without ALG= applies to every algorithm")
        p.add_argument("--eta", help="JIO projection step size")
        p.add_argument("--rank", type=int, help="reduced rank D")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="any other config key")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG next to the CSV")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "mse-time":
            p.add_argument("--match", action="store_true",
                           help="retune the full-rank step to JIO's steady-state MSE")
        if name == "complexity":
            p.add_argument("-M", type=int, default=None, help="filter length (default from config)")
    return parser


def config_from_args(args):
    overrides: dict = {}
    for flag, key in (("seed", "base_seed"), ("runs", "num_runs"), ("symbols", "num_symbols"),
                      ("rank", "rank"), ("eta", "eta_jio")):
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val if isinstance(val, str) else val
    for text in args.mu:
        alg, val = _step_override(text)
        targets = ALGORITHMS if alg is None else (alg,)
        for a in targets:
            if a not in ALGORITHMS:
                raise ConfigError(f"--mu: unknown algorithm {a!r}")
            overrides[f"mu_{a}"] = val
    for text in args.set:
        if "=" not in text:
            raise ConfigError(f"--set expects KEY=VALUE, got {text!r}")
        key, val = text.split("=", 1)
        overrides[key.strip()] = val.strip()
    if args.out is not None:
        overrides["output"] = str(args.out)
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "complexity":
        print(format_table(args.M or cfg.M, cfg.rank))
        return 0

    if args.command == "mse-time":
        data = generate_runs(cfg)
        if args.match:
            jio = run_mse_vs_symbols(cfg.replace(algorithms=("jio",)), data)
            mu, _ = match_fullrank_step(cfg, jio.meta["jio"]["steady_db"], data)
            cfg = cfg.replace(mu_full=mu)
        curve = run_mse_vs_symbols(cfg, data)
    elif args.command == "mse-rank":
        curve = run_mse_vs_rank(cfg)
    else:
        curve = run_ber_vs_symbols(cfg)

    out = emit_csv(curve, cfg.output)
    print(f"wrote {out}")
    if not args.no_plot:
        png = plot_curve(curve, out.with_suffix(".png"), TITLES[args.command])
        print(f"wrote {png}")
    dropped = {k: v for k, v in curve.diverged.items() if v}
    if dropped:
        print(f"diverged runs excluded: {dropped}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
