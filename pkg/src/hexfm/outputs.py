"""CSV and SVG emission for run logs and sweep tables.

Every file embeds the effective run configuration as ``# config ...`` comment
lines, so an output is interpretable on its own.  Floats are written with
%.17g and survive a write/parse round trip bit-exactly.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .cpg import LEGS
from .errors import InputError
from .harness import PER_LEG_FIELDS, RunLog, compute_summary
from .readout import GAITS


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_log_csv(log: RunLog, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in log.config_text.splitlines():
            fh.write(f"# config {line}\n")
        for key, value in log.meta.items():
            fh.write(f"# meta {key}={value}\n")
        fh.write(",".join(log.columns()) + "\n")
        matrix = log.matrix()
        for row in matrix:
            cells = [str(int(row[0])), str(int(row[1]))]
            cells += [_fmt(v) for v in row[2:]]
            fh.write(",".join(cells) + "\n")


def read_log_csv(path: str) -> RunLog:
    config_lines: list[str] = []
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read log {path}: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("# config "):
                config_lines.append(line[len("# config "):])
            elif line.startswith("# meta "):
                key, _, value = line[len("# meta "):].partition("=")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    if header is None:
        raise InputError(f"log {path} has no header row")
    with_norms = any(col.startswith("norm_") for col in header)
    log = RunLog(len(rows), "\n".join(config_lines), meta=meta, with_norms=with_norms)
    if rows:
        data = np.array(rows, dtype=float)
        log.tick = data[:, 0].astype(int)
        log.gait = data[:, 1].astype(int)
        log.bj = data[:, 2]
        log.body_x = data[:, 3]
        col = 4
        for name in PER_LEG_FIELDS:
            log.leg[name] = data[:, col : col + len(LEGS)]
            col += len(LEGS)
        if with_norms:
            log.norms = data[:, col : col + len(LEGS) * len(GAITS)].reshape(
                len(rows), len(LEGS), len(GAITS)
            )
    return log


def write_summary(log: RunLog, path: str) -> dict:
    summary = compute_summary(log)
    with open(path, "w", encoding="utf-8") as fh:
        for line in log.config_text.splitlines():
            fh.write(f"# config {line}\n")
        for key in sorted(summary):
            value = summary[key]
            fh.write(f"{key}={_fmt(value) if isinstance(value, float) else value}\n")
    return summary


def write_sweep_csv(rows: list[dict], path: str, config_text: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in config_text.splitlines():
            fh.write(f"# config {line}\n")
        fh.write("axis,value,model,mean,std,trials,samples\n")
        for row in rows:
            samples = ";".join(_fmt(float(s)) for s in row["samples"])
            fh.write(
                f"{row['axis']},{_fmt(row['value'])},{row['model']},"
                f"{_fmt(row['mean'])},{_fmt(row['std'])},{row['trials']},{samples}\n"
            )


def emit_outputs(log: RunLog, out_dir: str, stem: str, formats=("csv", "svg")) -> list[str]:
    """Write the log's CSV/summary/SVG files; returns the paths created."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        write_log_csv(log, csv_path)
        paths.append(csv_path)
        summary_path = os.path.join(out_dir, f"{stem}_summary.txt")
        write_summary(log, summary_path)
        paths.append(summary_path)
    if "svg" in formats and len(log):
        paths.extend(plot_log(log, out_dir, stem))
    return paths


def plot_log(log: RunLog, out_dir: str, stem: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    t = log.tick
    axes[0].plot(t, log.leg["u"][:, 0], lw=0.8, color="tab:blue")
    axes[0].set_ylabel("u (R1)")
    axes[1].plot(t, log.leg["fc"][:, 0], lw=0.8, color="tab:green")
    axes[1].set_ylabel("contact (R1)")
    axes[2].plot(t, log.leg["rf"][:, 0], lw=0.8, color="tab:red")
    axes[2].set_ylabel("predicted (R1)")
    axes[2].set_xlabel("tick")
    fig.suptitle(f"{stem}: rhythm, contact, prediction")
    path = os.path.join(out_dir, f"{stem}_signals.svg")
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    axes[0].plot(t, log.leg["s"][:, 0], lw=0.8, label="S")
    axes[0].plot(t, log.leg["e"][:, 0], lw=0.8, label="E")
    axes[0].set_ylabel("accumulators (R1)")
    axes[0].legend(loc="upper right", fontsize=8)
    axes[1].plot(t, log.bj, lw=0.8, color="tab:purple")
    axes[1].set_ylabel("backbone (deg)")
    axes[2].plot(t, log.body_x, lw=0.8, color="tab:gray")
    axes[2].set_ylabel("body x (cm)")
    axes[2].set_xlabel("tick")
    fig.suptitle(f"{stem}: adaptation and progress")
    path = os.path.join(out_dir, f"{stem}_control.svg")
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(10, 2.5))
    stance = (log.leg["u"] < 0).T
    ax.imshow(stance, aspect="auto", cmap="gray", interpolation="nearest")
    ax.set_yticks(range(len(LEGS)), LEGS)
    ax.set_xlabel("tick")
    fig.suptitle(f"{stem}: gait diagram (white = stance)")
    path = os.path.join(out_dir, f"{stem}_gait.svg")
    fig.savefig(path)
    plt.close(fig)
    paths.append(path)

    if log.norms is not None:
        fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
        for gi, gait in enumerate(GAITS):
            for li, leg in enumerate(LEGS):
                axes[gi].plot(t, log.norms[:, li, gi], lw=0.7, label=leg)
            axes[gi].set_ylabel(f"|w_out| {gait}")
        axes[0].legend(loc="upper right", fontsize=7, ncols=6)
        axes[2].set_xlabel("tick")
        fig.suptitle(f"{stem}: readout weight norms")
        path = os.path.join(out_dir, f"{stem}_norms.svg")
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_sweep(rows: list[dict], out_dir: str, stem: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    models = sorted({row["model"] for row in rows})
    for model in models:
        sel = [r for r in rows if r["model"] == model]
        xs = [r["value"] for r in sel]
        means = [r["mean"] for r in sel]
        stds = [r["std"] for r in sel]
        ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3, label=model)
    ax.set_xlabel(rows[0]["axis"] if rows else "value")
    ax.set_ylabel("mean (MSE or ticks)")
    if len(models) > 1:
        ax.legend()
    fig.suptitle(stem)
    path = os.path.join(out_dir, f"{stem}.svg")
    fig.savefig(path)
    plt.close(fig)
    return path
