"""Adaptation layer: forward models, error integrators, leg and backbone control.

Six identical reservoir/readout pairs, one per leg, turn the rhythm command
into an expected foot-contact signal.  The per-leg comparison

    delta = predicted_contact - actual_contact

feeds two non-negative integrators: S collects positive error during stance
(lost ground contact, drives searching: depress the leg, extend the tibia)
and E collects negative error during swing (unexpected contact, drives
elevation).  S resets when swing begins, E when stance begins.  Small
deltas below a dead band are ignored, and S only counts stance ticks past
the gait's contact lag, where contact is actually expected; both follow the
piecewise-linear error neurons of the underlying control design.

The backbone joint is a timeout state machine: a held stance error above
threshold tilts it up in error-proportional steps, a timeout sweeps it down
(extending the front reach), a second timeout returns it to -2 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpg import LEGS
from .errors import ConfigurationError, InputError
from .plant import lag_model
from .readout import GAITS, RlsReadout
from .reservoir import Reservoir, ReservoirParams

FRONT_LEGS = (0, 3)

BJ_NORMAL = -2.0
BJ_MAX = 30.0
BJ_DOWN_TARGET = -25.0


@dataclass
class ControlGains:
    """Gains and timeouts for searching/elevation and backbone control."""

    k_search: float = 0.1
    k_elev: float = 0.1
    k_gap: float = 0.1
    offset_clip: float = 0.5
    deadband: float = 0.1
    theta_bj: float = 0.5
    k_bj: float = 2.0
    bj_step_cap: float = 10.0
    bj_up_timeout: int = 170
    bj_down_timeout: int = 50


def instantaneous_error(rf: float, fc: float) -> float:
    """delta = predicted contact - actual contact; positive means lost support."""
    if not (-1e-9 <= rf <= 1.0 + 1e-9) or not (-1e-9 <= fc <= 1.0 + 1e-9):
        raise InputError(f"contact signals must lie in [0, 1]: rf={rf}, fc={fc}")
    return float(rf) - float(fc)


class AccumulatorPair:
    """Searching (S) and elevation (E) integrators for one leg."""

    def __init__(self, lag: int = 0, deadband: float = 0.0):
        self.s = 0.0
        self.e = 0.0
        self.phase = "stance"
        self.stance_tick = 0
        self.lag = lag
        self.deadband = deadband
        self.stance_max = 0.0
        self.held_max = 0.0
        self.stance_completed = False

    def update(self, delta: float, in_stance: bool) -> None:
        """Accumulate one tick of error; handles phase transitions and resets."""
        self.stance_completed = False
        if in_stance and self.phase == "swing":
            self.e = 0.0
            self.stance_tick = 0
            self.stance_max = 0.0
            self.phase = "stance"
        elif not in_stance and self.phase == "stance":
            self.held_max = self.stance_max
            self.stance_completed = True
            self.s = 0.0
            self.phase = "swing"
        if in_stance:
            pos = max(delta, 0.0)
            if self.stance_tick >= self.lag and pos >= self.deadband:
                self.s += pos
            self.stance_max = max(self.stance_max, self.s)
            self.stance_tick += 1
        else:
            neg = max(-delta, 0.0)
            if neg >= self.deadband:
                self.e += neg


@dataclass
class LegOffsets:
    ctr: float = 0.0
    tc: float = 0.0
    fti: float = 0.0


def leg_offsets(
    acc: AccumulatorPair,
    gains: ControlGains,
    gap_mode: bool = False,
) -> LegOffsets:
    """Joint offsets from the accumulated errors.

    Searching (stance): depress the leg and extend the tibia with S.  In gap
    mode the forward/backward joint also extends, and the previous stance's
    held maximum error keeps both extension joints shifted forward.
    Elevation (swing): lift the leg with E.
    """
    clip = gains.offset_clip
    out = LegOffsets()
    floor = gains.k_gap * acc.held_max if gap_mode else 0.0
    if acc.phase == "stance":
        live = gains.k_search * acc.s
        out.ctr = -min(clip, live)
        out.fti = min(clip, live + floor)
        out.tc = min(clip, (live if gap_mode else 0.0) + floor)
    else:
        out.ctr = min(clip, gains.k_elev * acc.e)
        out.fti = min(clip, floor)
        out.tc = min(clip, floor)
    return out


class BackboneJoint:
    """Timeout state machine for the backbone joint angle (degrees)."""

    def __init__(self, gains: ControlGains):
        self.gains = gains
        self.angle = BJ_NORMAL
        self.mode = "normal"
        self.timer = 0

    def update(self, max_err_prev: float, stance_completed: bool) -> float:
        g = self.gains
        if self.mode == "normal":
            if stance_completed and max_err_prev > g.theta_bj:
                self.mode = "tilt_up"
                self.timer = 0
                self._step_up(max_err_prev)
        elif self.mode == "tilt_up":
            self.timer += 1
            if stance_completed and max_err_prev > g.theta_bj:
                self._step_up(max_err_prev)
            if self.timer >= g.bj_up_timeout:
                self.mode = "tilt_down"
                self.timer = 0
                self._down_rate = (BJ_DOWN_TARGET - self.angle) / g.bj_down_timeout
        elif self.mode == "tilt_down":
            self.timer += 1
            self.angle = max(BJ_DOWN_TARGET, self.angle + self._down_rate)
            if self.timer >= g.bj_down_timeout:
                self.mode = "normal"
                self.timer = 0
                self.angle = BJ_NORMAL
        return self.angle

    def _step_up(self, err: float) -> None:
        step = min(self.gains.k_bj * err, self.gains.bj_step_cap)
        self.angle = min(BJ_MAX, self.angle + step)


class ForwardModelBank:
    """Six reservoir/readout pairs, one per leg, sharing identical parameters."""

    def __init__(self, reservoirs: list[Reservoir], readouts: list[RlsReadout]):
        if len(reservoirs) != len(LEGS) or len(readouts) != len(LEGS):
            raise ConfigurationError(f"bank needs {len(LEGS)} legs")
        self.reservoirs = reservoirs
        self.readouts = readouts

    @classmethod
    def build(cls, params: ReservoirParams, delta_c: float, seed: int) -> "ForwardModelBank":
        leg_seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, len(LEGS))
        reservoirs = []
        for s in leg_seeds:
            leg_params = ReservoirParams(**{**params.__dict__, "seed": int(s)})
            reservoirs.append(Reservoir(leg_params))
        readouts = [RlsReadout(params.size, delta_c) for _ in LEGS]
        return cls(reservoirs, readouts)

    def reset_states(self) -> None:
        for res in self.reservoirs:
            res.reset_state()

    def predict_step(self, leg: int, u: float, gait: int | str) -> float:
        """Advance one leg's reservoir and return its clipped contact prediction."""
        r = self.reservoirs[leg].step(u)
        z = self.readouts[leg].predict(r, gait)
        return float(np.clip(z, 0.0, 1.0))

    def train_step(self, leg: int, u: float, d: float, gait: int | str) -> tuple[float, float]:
        """One online learning tick for a single leg."""
        r = self.reservoirs[leg].step(u)
        return self.readouts[leg].step(r, d, gait)

    # -- persistence --------------------------------------------------------

    def to_text(self, header_lines: list[str] | None = None) -> str:
        res0 = self.reservoirs[0]
        lines = ["# hexfm weights v1"]
        for extra in header_lines or []:
            lines.append(f"# {extra}")
        lines.append(f"legs {len(LEGS)}")
        lines.append(f"neurons {res0.size}")
        lines.append(f"gaits {len(GAITS)}")
        lines.append(f"delta_c {self.readouts[0].delta_c:.17g}")
        for i, name in enumerate(LEGS):
            res, ro = self.reservoirs[i], self.readouts[i]
            lines.append(f"[leg {name}]")
            for label, arr in (
                ("w_in", res.w_in),
                ("bias", res.bias),
                ("a", res.a),
                ("b", res.b),
                ("tau", res.tau),
                ("w_rec", res.w_rec.ravel()),
                ("w_out", ro.w_out.ravel()),
            ):
                values = " ".join(f"{v:.17g}" for v in arr)
                lines.append(f"{label} {values}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, params: ReservoirParams) -> "ForwardModelBank":
        fields: dict[str, dict[str, np.ndarray]] = {}
        meta: dict[str, float] = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[leg "):
                current = line[5:-1]
                fields[current] = {}
                continue
            key, rest = line.split(None, 1)
            if current is None:
                meta[key] = float(rest)
            else:
                fields[current][key] = np.fromstring(rest, sep=" ")
        n = int(meta["neurons"])
        if n != params.size:
            raise ConfigurationError(
                f"weight file has {n} neurons, config says {params.size}"
            )
        reservoirs, readouts = [], []
        for name in LEGS:
            block = fields[name]
            res = Reservoir(params)
            res.w_in = block["w_in"]
            res.bias = block["bias"]
            res.a = block["a"]
            res.b = block["b"]
            res.tau = block["tau"]
            res.w_rec = block["w_rec"].reshape(n, n)
            res.adapted = True
            ro = RlsReadout(n, meta["delta_c"])
            ro.w_out = block["w_out"].reshape(n, len(GAITS))
            ro.learning_enabled = False
            reservoirs.append(res)
            readouts.append(ro)
        return cls(reservoirs, readouts)


class BaselineModel:
    """Single-neuron forward model: delayed threshold plus low-pass filter.

    The delay is fixed when the model is set up (matching the motor-to-contact
    timing of its training gait) and never adapts, so other gaits see a
    systematic timing mismatch.
    """

    def __init__(self, trained_gait: str = "wave", lpf: float = 0.9):
        self.delay = lag_model(trained_gait)
        self.lpf = lpf
        self._buf = [0.0] * self.delay
        self._idx = 0
        self.y = 0.0

    def reset(self) -> None:
        self._buf = [0.0] * self.delay
        self._idx = 0
        self.y = 0.0

    def predict_step(self, u: float) -> float:
        if not np.isfinite(u):
            raise InputError(f"non-finite baseline input: {u!r}")
        if self.delay == 0:
            delayed = u
        else:
            delayed = self._buf[self._idx]
            self._buf[self._idx] = u
            self._idx = (self._idx + 1) % self.delay
        square = 1.0 if delayed < 0.0 else 0.0
        self.y = self.lpf * self.y + (1.0 - self.lpf) * square
        return self.y


class BaselineBank:
    """Per-leg baseline predictors with a shared fixed training gait."""

    def __init__(self, trained_gait: str = "wave"):
        self.models = [BaselineModel(trained_gait) for _ in LEGS]

    def reset_states(self) -> None:
        for m in self.models:
            m.reset()

    def predict_step(self, leg: int, u: float, gait: int | str) -> float:
        return self.models[leg].predict_step(u)


class AdaptiveController:
    """Per-leg accumulators plus the backbone joint, updated once per tick."""

    def __init__(
        self,
        gains: ControlGains,
        gait: str,
        gap_mode: bool = False,
        bj_enabled: bool = False,
    ):
        lag = lag_model(gait)
        self.gains = gains
        self.gap_mode = gap_mode
        self.bj_enabled = bj_enabled
        self.acc = [AccumulatorPair(lag, gains.deadband) for _ in LEGS]
        self.bj = BackboneJoint(gains)

    def update(self, rf: np.ndarray, fc: np.ndarray, stance: np.ndarray) -> dict:
        """Consume one tick of predictions/contacts; returns next-tick offsets."""
        deltas = np.empty(len(LEGS))
        for i in range(len(LEGS)):
            deltas[i] = instantaneous_error(rf[i], fc[i])
            self.acc[i].update(deltas[i], bool(stance[i]))
        if self.bj_enabled:
            completed = any(self.acc[i].stance_completed for i in FRONT_LEGS)
            front_err = max(self.acc[i].held_max for i in FRONT_LEGS)
            bj_angle = self.bj.update(front_err, completed)
        else:
            bj_angle = BJ_NORMAL
        offs = [leg_offsets(self.acc[i], self.gains, self.gap_mode) for i in range(len(LEGS))]
        return {
            "delta": deltas,
            "s": np.array([a.s for a in self.acc]),
            "e": np.array([a.e for a in self.acc]),
            "held_max": np.array([a.held_max for a in self.acc]),
            "ctr_off": np.array([o.ctr for o in offs]),
            "tc_off": np.array([o.tc for o in offs]),
            "fti_off": np.array([o.fti for o in offs]),
            "bj": bj_angle,
        }
