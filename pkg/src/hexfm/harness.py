"""Experiment driver: training protocol, closed-loop scenarios, sweeps.

Training walks the plant on flat ground through the gait sequence
wave -> tetrapod -> caterpillar, one block of ``block_ticks`` each, for
``cycles`` full cycles.  The collected rhythm/contact streams first feed the
reservoir pre-training (intrinsic plasticity and time-constant search), then
an online RLS pass trains one readout column per gait.  Scenario runs load
the frozen models and close the loop: motor frame -> plant contact ->
prediction error -> searching/elevation offsets and backbone joint -> next
motor frame.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .config import RunConfig
from .control import (
    AdaptiveController,
    BaselineBank,
    ControlGains,
    ForwardModelBank,
)
from .cpg import LEGS, Gait, MotorFrame, MotorPipeline, So2Oscillator
from .errors import ConfigurationError, InputError
from .plant import Corruption, Plant, Terrain, inject_corruption, progress_metrics
from .readout import GAITS, RlsReadout
from .reservoir import Reservoir, ReservoirParams

PER_LEG_FIELDS = ("u", "rf", "fc", "delta", "s", "e", "ctr_off", "tc_off", "fti_off")
TRANSIENT_TICKS = 50


class RunLog:
    """Fixed-schema per-tick record of one run.

    Columns: tick, gait (index into GAITS), bj (degrees), body_x (cm), then
    per leg: u, rf, fc, delta, s, e, ctr_off, tc_off, fti_off.  Training logs
    add the readout weight norm per leg and gait.  ``meta`` carries the few
    scalars (scenario, challenge end) needed to recompute the summary from a
    parsed CSV.
    """

    def __init__(
        self,
        n_ticks: int,
        config_text: str = "",
        meta: dict | None = None,
        with_norms: bool = False,
    ):
        self.config_text = config_text
        self.meta = dict(meta or {})
        self.tick = np.arange(n_ticks)
        self.gait = np.zeros(n_ticks, dtype=int)
        self.bj = np.zeros(n_ticks)
        self.body_x = np.zeros(n_ticks)
        self.leg = {name: np.zeros((n_ticks, len(LEGS))) for name in PER_LEG_FIELDS}
        self.norms = np.zeros((n_ticks, len(LEGS), len(GAITS))) if with_norms else None

    def __len__(self) -> int:
        return len(self.tick)

    def columns(self) -> list[str]:
        cols = ["tick", "gait", "bj", "body_x"]
        for field in PER_LEG_FIELDS:
            cols += [f"{field}_{leg}" for leg in LEGS]
        if self.norms is not None:
            for leg in LEGS:
                cols += [f"norm_{gait}_{leg}" for gait in GAITS]
        return cols

    def matrix(self) -> np.ndarray:
        parts = [
            self.tick[:, None].astype(float),
            self.gait[:, None].astype(float),
            self.bj[:, None],
            self.body_x[:, None],
        ]
        parts += [self.leg[name] for name in PER_LEG_FIELDS]
        if self.norms is not None:
            parts.append(self.norms.reshape(len(self), -1))
        return np.hstack(parts) if len(self) else np.zeros((0, len(self.columns())))

    def gait_blocks(self) -> list[tuple[int, int, int]]:
        """Contiguous (start, end, gait_index) runs of the gait column."""
        if len(self) == 0:
            return []
        change = np.flatnonzero(np.diff(self.gait)) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [len(self)]])
        return [(int(s), int(e), int(self.gait[s])) for s, e in zip(starts, ends)]


def nmse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error normalized by target variance."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    var = float(np.var(target))
    if var <= 0.0:
        return float("nan")
    return float(np.mean((pred - target) ** 2) / var)


def compute_summary(log: RunLog) -> dict:
    """Summary statistics derived purely from the logged columns and meta."""
    summary: dict = {}
    for start, end, gi in log.gait_blocks():
        lo = min(start + TRANSIENT_TICKS, end)
        tag = GAITS[gi]
        for li, leg in enumerate(LEGS):
            key = f"nmse_{tag}_{leg}"
            summary[key] = nmse(log.leg["rf"][lo:end, li], log.leg["fc"][lo:end, li])
        if log.norms is not None and end - start >= 550:
            # norm endpoints averaged over 50 ticks: the learning noise leaves
            # minute weight fluctuations on top of the converged value
            n_end = log.norms[end - 50 : end, :, gi].mean(axis=0)
            n_before = log.norms[end - 500 : end - 450, :, gi].mean(axis=0)
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.abs(n_end - n_before) / np.where(n_end > 0, n_end, np.nan)
            summary[f"norm_rel_change_{tag}_{start}"] = float(np.nanmax(rel))
    if "challenge_end" in log.meta and len(log):
        goal = float(log.meta["challenge_end"]) + 1.0
        past = np.flatnonzero(log.body_x >= goal)
        summary["success"] = bool(past.size)
        summary["success_tick"] = int(past[0]) if past.size else -1
        summary["distance"] = float(log.body_x[-1])
    return summary


# -- open-loop collection ----------------------------------------------------


def stance_ticks_nominal(gait: Gait) -> int:
    return int(round(gait.duty * gait.period))


def collect_flat(gait: Gait, ticks: int, body_x: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Rhythm commands and flat-ground contact signals, (ticks, legs) each."""
    pipeline = MotorPipeline(gait)
    pipeline.prime()
    terrain = Terrain([])
    plant = Plant(
        terrain, gait.name, seed=0, body_x=body_x, stance_len=stance_ticks_nominal(gait)
    )
    u = np.zeros((ticks, len(LEGS)))
    fc = np.zeros((ticks, len(LEGS)))
    for t in range(ticks):
        frame = pipeline.step()
        u[t] = frame.ctr
        fc[t] = plant.step(frame)
    return u, fc


def collect_protocol(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full training protocol streams: u, fc, and per-tick gait index.

    Each gait block restarts its motor pipeline, so blocks of the same gait
    are identical across cycles; they are collected once and repeated.
    """
    per_gait = {}
    for gi, name in enumerate(GAITS):
        per_gait[gi] = collect_flat(cfg.gait_table[name], cfg.block_ticks)
    blocks_u, blocks_fc, blocks_gait = [], [], []
    for _cycle in range(cfg.cycles):
        for gi in range(len(GAITS)):
            u, fc = per_gait[gi]
            blocks_u.append(u)
            blocks_fc.append(fc)
            blocks_gait.append(np.full(cfg.block_ticks, gi, dtype=int))
    return np.vstack(blocks_u), np.vstack(blocks_fc), np.concatenate(blocks_gait)


# -- training -----------------------------------------------------------------


def run_training(cfg: RunConfig) -> tuple[ForwardModelBank, RunLog, list]:
    """Pre-train and RLS-train the six forward models on the flat protocol."""
    if cfg.scenario != "train_flat":
        raise ConfigurationError(f"training requires scenario train_flat, got {cfg.scenario}")
    cfg.validate()
    started = time.monotonic()
    u_all, fc_all, gait_idx = collect_protocol(cfg)
    total = len(u_all)

    bank = ForwardModelBank.build(cfg.reservoir, cfg.delta_c, cfg.seed)
    reports = []
    for li in range(len(LEGS)):
        reports.append(
            bank.reservoirs[li].pretrain(
                u_all[:, li],
                fc_all[:, li],
                cfg.pretrain_epochs,
                ridge=cfg.delta_c,
                noise=cfg.readout_noise,
            )
        )

    log = RunLog(
        total,
        cfg.effective_text(),
        meta={"scenario": "train_flat"},
        with_norms=True,
    )
    bank.reset_states()
    # seeded readout-synapse noise: regularizes the online fit so the weights
    # settle instead of chasing barely excited directions of the noise-free
    # rate stream (the learned weights keep minute fluctuations, nothing more)
    noise_rngs = [
        np.random.default_rng(np.random.SeedSequence([cfg.seed, 90210, li]))
        for li in range(len(LEGS))
    ]
    for t in range(total):
        gi = int(gait_idx[t])
        log.gait[t] = gi
        log.bj[t] = -2.0
        for li in range(len(LEGS)):
            r = bank.reservoirs[li].step(u_all[t, li])
            if cfg.readout_noise > 0.0:
                r = r + noise_rngs[li].normal(0.0, cfg.readout_noise, cfg.reservoir.size)
            z, _e = bank.readouts[li].step(r, fc_all[t, li], gi)
            log.leg["u"][t, li] = u_all[t, li]
            log.leg["fc"][t, li] = fc_all[t, li]
            log.leg["rf"][t, li] = min(1.0, max(0.0, z))
            log.norms[t, li] = np.linalg.norm(bank.readouts[li].w_out, axis=0)
    for ro in bank.readouts:
        ro.learning_enabled = False

    log.meta["train_seconds"] = f"{time.monotonic() - started:.3f}"
    return bank, log, reports


def save_weights(bank: ForwardModelBank, cfg: RunConfig, path: str) -> None:
    header = [f"config {line}" for line in cfg.effective_text().splitlines()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(bank.to_text(header))


def load_weights(path: str, cfg: RunConfig) -> ForwardModelBank:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read weights file {path}: {exc}") from exc
    return ForwardModelBank.from_text(text, cfg.reservoir)


# -- closed-loop scenarios ------------------------------------------------------


def _build_predictor(cfg: RunConfig, bank: ForwardModelBank | None):
    if cfg.model == "baseline":
        return BaselineBank(trained_gait=GAITS[0])
    if bank is None:
        raise InputError("reservoir scenario run requires trained weights")
    bank.reset_states()
    return bank


def run_scenario(cfg: RunConfig, bank: ForwardModelBank | None) -> RunLog:
    """Closed-loop run of the configured scenario; returns the tick log."""
    cfg.validate()
    preset = cfg.scenario_preset()
    gait = cfg.gait_table[preset["gait"]]
    terrain = Terrain.from_segment_list(preset["terrain"])
    gap_mode = any(seg.kind == "gap" for seg in terrain.segments)
    predictor = _build_predictor(cfg, bank)

    seeds = np.random.default_rng(cfg.seed).integers(0, 2**31 - 1, 2)
    pipeline = MotorPipeline(gait)
    pipeline.prime()
    plant = Plant(
        terrain, gait.name, seed=int(seeds[0]), stance_len=stance_ticks_nominal(gait)
    )
    controller = AdaptiveController(
        cfg.gains,
        gait.name,
        gap_mode=gap_mode,
        bj_enabled=preset["bj_enabled"] and cfg.adaptation,
    )

    frames = [pipeline.step() for _ in range(cfg.ticks)]
    u_raw = np.stack([f.ctr for f in frames])
    u_fm = np.column_stack(
        [
            inject_corruption(u_raw[:, li], cfg.corruption, seed=int(seeds[1]) + li)
            for li in range(len(LEGS))
        ]
    )

    gi = GAITS.index(gait.name)
    log = RunLog(
        cfg.ticks,
        cfg.effective_text(),
        meta={
            "scenario": cfg.scenario,
            "challenge_end": f"{terrain.challenge_end():.17g}",
            "model": cfg.model,
        },
    )
    ctr_off = np.zeros(len(LEGS))
    tc_off = np.zeros(len(LEGS))
    fti_off = np.zeros(len(LEGS))
    bj = -2.0
    rf = np.zeros(len(LEGS))
    for t in range(cfg.ticks):
        frame = frames[t]
        if cfg.adaptation:
            frame.ctr_off = ctr_off
            frame.tc_off = tc_off
            frame.fti_off = fti_off
        frame.bj = bj
        fc = plant.step(frame)
        for li in range(len(LEGS)):
            rf[li] = predictor.predict_step(li, u_fm[t, li], gi)
        out = controller.update(rf, fc, frame.stance())
        if cfg.adaptation:
            ctr_off = out["ctr_off"]
            tc_off = out["tc_off"]
            fti_off = out["fti_off"]
            bj = out["bj"]
        log.gait[t] = gi
        log.bj[t] = bj
        log.body_x[t] = plant.body_x
        log.leg["u"][t] = u_fm[t]
        log.leg["rf"][t] = rf
        log.leg["fc"][t] = fc
        log.leg["delta"][t] = out["delta"]
        log.leg["s"][t] = out["s"]
        log.leg["e"][t] = out["e"]
        log.leg["ctr_off"][t] = ctr_off
        log.leg["tc_off"][t] = tc_off
        log.leg["fti_off"][t] = fti_off
    return log


def run_prediction_eval(
    cfg: RunConfig,
    bank: ForwardModelBank | None,
    gait_name: str,
    ticks: int,
    corruption: Corruption | None = None,
) -> RunLog:
    """Open-loop flat-ground prediction run (no adaptation, no learning)."""
    gait = cfg.gait_table[gait_name]
    predictor = _build_predictor(cfg, bank)
    u, fc = collect_flat(gait, ticks)
    u_fm = np.column_stack(
        [
            inject_corruption(u[:, li], corruption, seed=cfg.seed + li)
            for li in range(len(LEGS))
        ]
    )
    gi = GAITS.index(gait_name)
    log = RunLog(ticks, cfg.effective_text(), meta={"scenario": f"eval_{gait_name}"})
    log.gait[:] = gi
    log.bj[:] = -2.0
    log.leg["u"][:] = u_fm
    log.leg["fc"][:] = fc
    for t in range(ticks):
        for li in range(len(LEGS)):
            log.leg["rf"][t, li] = predictor.predict_step(li, u_fm[t, li], gi)
    log.leg["delta"][:] = log.leg["rf"] - fc
    return log


# -- sweeps --------------------------------------------------------------------


def _single_leg_mse(
    params: ReservoirParams,
    delta_c: float,
    u: np.ndarray,
    d: np.ndarray,
    train_ticks: int,
    pretrain_epochs: int,
) -> float:
    """Train one reservoir/readout on a single-gait stream; MSE on the tail."""
    res = Reservoir(params)
    res.pretrain(u[:train_ticks], d[:train_ticks], pretrain_epochs)
    ro = RlsReadout(params.size, delta_c)
    res.reset_state()
    for t in range(train_ticks):
        r = res.step(u[t])
        ro.step(r, d[t], 0)
    errs = []
    for t in range(train_ticks, len(u)):
        r = res.step(u[t])
        errs.append(ro.predict(r, 0) - d[t])
    return float(np.mean(np.square(errs)))


def run_sweep(
    cfg: RunConfig,
    axis: str,
    values: list[float],
    trials: int,
    bank: ForwardModelBank | None = None,
) -> list[dict]:
    """Parameter sweep; returns one row per swept value (and model)."""
    if axis not in ("g", "N", "elasticity"):
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    rows: list[dict] = []
    if axis in ("g", "N"):
        eval_ticks = 500
        gait = cfg.gait_table["wave"]
        u, fc = collect_flat(gait, cfg.block_ticks + eval_ticks)
        seed_rng = np.random.default_rng(cfg.seed)
        trial_seeds = seed_rng.integers(0, 2**31 - 1, trials)
        for value in values:
            mses = []
            for trial in range(trials):
                params = replace(
                    cfg.reservoir,
                    gain=float(value) if axis == "g" else cfg.reservoir.gain,
                    size=int(value) if axis == "N" else cfg.reservoir.size,
                    seed=int(trial_seeds[trial]),
                )
                mses.append(
                    _single_leg_mse(
                        params, cfg.delta_c, u[:, 0], fc[:, 0],
                        cfg.block_ticks, cfg.pretrain_epochs,
                    )
                )
            rows.append(
                {
                    "axis": axis,
                    "value": float(value),
                    "model": "reservoir",
                    "mean": float(np.mean(mses)),
                    "std": float(np.std(mses)),
                    "trials": trials,
                    "samples": mses,
                }
            )
        return rows

    # elasticity axis: closed-loop success times for both model kinds
    for model in ("reservoir", "baseline"):
        for value in values:
            ticks_taken = []
            for trial in range(trials):
                run_cfg = replace(
                    cfg,
                    scenario="rough_elastic",
                    elasticity=float(value),
                    model=model,
                    seed=cfg.seed + 1009 * (trial + 1),
                )
                log = run_scenario(run_cfg, bank)
                terrain = Terrain.from_segment_list(run_cfg.scenario_preset()["terrain"])
                metrics = progress_metrics(log.body_x, terrain)
                ticks_taken.append(
                    metrics["success_tick"] if metrics["success"] else run_cfg.ticks
                )
            rows.append(
                {
                    "axis": axis,
                    "value": float(value),
                    "model": model,
                    "mean": float(np.mean(ticks_taken)),
                    "std": float(np.std(ticks_taken)),
                    "trials": trials,
                    "samples": ticks_taken,
                }
            )
    return rows
