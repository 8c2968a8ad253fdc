"""``qrx`` command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
``QRX_THREADS`` caps the Monte Carlo worker count; it never changes results.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bounds import NumericalError
from .experiments import (
    OPT_COLUMNS,
    ORDER_COLUMNS,
    RECEIVERS,
    RESULT_COLUMNS,
    ConfigError,
    ExperimentConfig,
    make_config,
    parse_config_text,
    parse_grid,
    parse_ns_list,
    render_csv,
    run_analytic,
    run_bounds,
    run_fig4,
    run_mc_sweep,
    run_optimize_delta,
    run_optimize_order,
    run_optimize_T,
)
from .staged import parse_order

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

FIG_DEFAULTS = {
    "fig3a": {"ns": "0.5:15:30"},
    "fig3b": {"ns": "0.5:15:30"},
    "fig4": {"ns": "0.5:15:30"},
}


def _count(text: str) -> int:
    """Integer that may be written in float notation, e.g. ``1e6``."""
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    return int(value)


def _order(text: str):
    try:
        return parse_order(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p: argparse.ArgumentParser, receiver: bool = False) -> None:
    p.add_argument("--config", type=Path, help="key = value config file; flags override it")
    if receiver:
        p.add_argument("--receiver", choices=RECEIVERS)
    p.add_argument("--L", type=_count, help="constellation side length (M = L^2)")
    p.add_argument("--ns", help="mean photon number(s), comma separated")
    p.add_argument("--ns-grid", dest="ns_grid", help="inclusive grid lo:hi:steps")
    p.add_argument("--N", type=_count, help="number of time slices (partitions)")
    p.add_argument("--T", type=float, help="splitter transmittance")
    p.add_argument("--delta", type=float, help="real displacement offset (0 = exact nulling)")
    p.add_argument("--eta", type=float, help="detector quantum efficiency")
    p.add_argument("--nu", type=float, help="dark counts expected per slice")
    p.add_argument("--order", type=_order, help="probing order: type1, type2 or e.g. 0,3,1,2")
    p.add_argument("--trials", type=_count, help="Monte Carlo trials per point")
    p.add_argument("--seed", type=_count, help="Monte Carlo seed")
    p.add_argument("--k-max", dest="k_max", type=_count, help="PNRD count truncation")
    p.add_argument("--out", help="output CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrx", description="QAM quantum-receiver simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("bounds", help="SQL and SRM (Helstrom approx.) error curves"))
    _common(sub.add_parser("analytic", help="exact error of one receiver"), receiver=True)
    _common(sub.add_parser("mc", help="Monte Carlo error of one receiver"), receiver=True)

    opt = sub.add_parser("optimize", help="parameter optimisation")
    opt.add_argument("target", choices=("T", "delta", "order"))
    _common(opt, receiver=True)

    fig = sub.add_parser("figure", help="figure-reproduction presets")
    fig.add_argument("name", choices=tuple(FIG_DEFAULTS))
    _common(fig)
    return parser


def config_from_args(args: argparse.Namespace):
    base = {}
    if args.config is not None:
        try:
            base = parse_config_text(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    if args.command == "figure" and "ns" not in base and args.ns is None and args.ns_grid is None:
        base["ns"] = parse_grid(FIG_DEFAULTS[args.name]["ns"])
    ns = None
    if args.ns_grid is not None:
        ns = parse_grid(args.ns_grid)
    elif args.ns is not None:
        ns = parse_ns_list(args.ns)
    flags = {k: getattr(args, k, None) for k in
             ("receiver", "L", "N", "T", "delta", "eta", "nu", "order", "trials", "seed", "k_max", "out")}
    return make_config(base, ns=ns, **flags).validate()


def execute(args: argparse.Namespace) -> tuple[ExperimentConfig, str]:
    """Run the requested command; returns the effective config and CSV text."""
    cfg = config_from_args(args)
    cmd = args.command
    return cfg, _render(cmd, args, cfg)


def _render(cmd: str, args: argparse.Namespace, cfg: ExperimentConfig) -> str:
    if cmd == "bounds":
        return render_csv(cmd, cfg, RESULT_COLUMNS, run_bounds(cfg))
    if cmd == "analytic":
        return render_csv(cmd, cfg, RESULT_COLUMNS, run_analytic(cfg))
    if cmd == "mc":
        return render_csv(cmd, cfg, RESULT_COLUMNS, run_mc_sweep(cfg))
    if cmd == "optimize":
        label = f"optimize {args.target}"
        if args.target == "order":
            return render_csv(label, cfg, ORDER_COLUMNS, run_optimize_order(cfg))
        if cfg.receiver not in ("type1", "type2"):
            raise ConfigError(f"optimize {args.target} applies to type1/type2, got {cfg.receiver}")
        run = run_optimize_T if args.target == "T" else run_optimize_delta
        return render_csv(label, cfg, OPT_COLUMNS, run(cfg, (cfg.receiver,)))
    label = f"figure {args.name}"
    if args.name == "fig3a":
        return render_csv(label, cfg, OPT_COLUMNS, run_optimize_T(cfg, ("type1",)))
    if args.name == "fig3b":
        return render_csv(label, cfg, OPT_COLUMNS, run_optimize_delta(cfg, ("type1", "type2")))
    return render_csv(label, cfg, RESULT_COLUMNS, run_fig4(cfg))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, text = execute(args)
        if cfg.out is None:
            sys.stdout.write(text)
        else:
            Path(cfg.out).write_text(text)
    except ConfigError as exc:
        print(f"qrx: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"qrx: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError, FloatingPointError) as exc:
        print(f"qrx: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
