"""Command line driver: train, run, sweep, plot."""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import ConfigurationError, InputError, NumericError
from .harness import compute_summary, run_scenario, run_sweep, run_training, save_weights, load_weights
from .outputs import emit_outputs, plot_log, plot_sweep, read_log_csv, write_sweep_csv


def weights_path(out_dir: str, seed: int) -> str:
    return os.path.join(out_dir, f"weights_seed{seed}.txt")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hexfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the forward models on flat ground")
    _add_common(p_train)

    p_run = sub.add_parser("run", help="closed-loop scenario run")
    _add_common(p_run)
    p_run.add_argument("--scenario", default=None,
                       help="gap_double | rough_elastic | obstacle | stairs")
    p_run.add_argument("--model", default=None, choices=("reservoir", "baseline"))
    p_run.add_argument("--ticks", type=int, default=None)
    p_run.add_argument("--weights", default=None, help="trained weights file")

    p_sweep = sub.add_parser("sweep", help="parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=("g", "N", "elasticity"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 0.1,0.5,0.95,1.2")
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--weights", default=None)

    p_plot = sub.add_parser("plot", help="re-render SVG plots from a log CSV")
    p_plot.add_argument("--log", required=True)
    p_plot.add_argument("--out", default=None)
    return parser


def cmd_train(args) -> int:
    cfg = load_config(args.config, {
        "scenario": "train_flat", "seed": args.seed, "out_dir": args.out,
    })
    bank, log, _reports = run_training(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    wpath = weights_path(cfg.out_dir, cfg.seed)
    save_weights(bank, cfg, wpath)
    paths = emit_outputs(log, cfg.out_dir, f"train_seed{cfg.seed}")
    summary = compute_summary(log)
    print(f"trained 6 forward models in {log.meta['train_seconds']} s")
    print(f"weights: {wpath}")
    for key in sorted(k for k in summary if k.startswith("nmse_")):
        print(f"{key} = {summary[key]:.5f}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config, {
        "seed": args.seed, "out_dir": args.out, "model": args.model,
        "scenario": args.scenario, "ticks": args.ticks,
    })
    if cfg.scenario == "train_flat":
        raise ConfigurationError("use the train command for the training scenario")
    bank = None
    if cfg.model == "reservoir":
        wpath = args.weights or weights_path(cfg.out_dir, cfg.seed)
        bank = load_weights(wpath, cfg)
    log = run_scenario(cfg, bank)
    stem = f"run_{cfg.scenario}_{cfg.model}_seed{cfg.seed}"
    paths = emit_outputs(log, cfg.out_dir, stem)
    summary = compute_summary(log)
    if "success" in summary:
        state = "success" if summary["success"] else "FAILED"
        print(f"{cfg.scenario} ({cfg.model}): {state}, "
              f"tick {summary['success_tick']}, distance {summary['distance']:.1f} cm")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, {
        "seed": args.seed, "out_dir": args.out, "trials": args.trials,
    })
    values = [float(v) for v in args.values.split(",")]
    bank = None
    if args.axis == "elasticity":
        wpath = args.weights or weights_path(cfg.out_dir, cfg.seed)
        if os.path.exists(wpath):
            bank = load_weights(wpath, cfg)
        else:
            print("no weights found; training first")
            train_cfg = load_config(args.config, {
                "scenario": "train_flat", "seed": args.seed, "out_dir": args.out,
            })
            bank, _log, _reports = run_training(train_cfg)
            os.makedirs(cfg.out_dir, exist_ok=True)
            save_weights(bank, train_cfg, wpath)
    rows = run_sweep(cfg, args.axis, values, cfg.trials, bank=bank)
    os.makedirs(cfg.out_dir, exist_ok=True)
    stem = f"sweep_{args.axis}_seed{cfg.seed}"
    csv_path = os.path.join(cfg.out_dir, f"{stem}.csv")
    write_sweep_csv(rows, csv_path, cfg.effective_text())
    svg_path = plot_sweep(rows, cfg.out_dir, stem)
    for row in rows:
        print(f"{row['axis']}={row['value']:g} model={row['model']}: "
              f"{row['mean']:.6g} +/- {row['std']:.6g} ({row['trials']} trials)")
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return 0


def cmd_plot(args) -> int:
    log = read_log_csv(args.log)
    out_dir = args.out or os.path.dirname(args.log) or "."
    stem = os.path.splitext(os.path.basename(args.log))[0]
    for path in plot_log(log, out_dir, stem):
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "run": cmd_run, "sweep": cmd_sweep, "plot": cmd_plot}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, InputError, NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
