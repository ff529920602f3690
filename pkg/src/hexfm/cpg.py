"""Central pattern generation: SO(2) oscillator, pulse shaping, delay lines.

The rhythm source is a two-neuron fully connected recurrent network whose
weight matrix is a scaled rotation,

    o <- tanh(alpha * R(phi) * o),   phi = PHI_BASE + PHI_SLOPE * MI,

so the modulatory input MI sets the oscillation frequency (larger MI, faster
rhythm).  Per-leg motor programs are built by delaying the oscillation by the
leg's phase offset, shaping it into a duty-asymmetric trapezoid (stance
plateau at -1, swing plateau at +1) and deriving the other two joints from
the shaped signal: the forward/backward joint leads by a quarter period and
the tibia joint mirrors it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .readout import GAITS

LEGS = ("R1", "R2", "R3", "L1", "L2", "L3")
LEG_INDEX = {name: i for i, name in enumerate(LEGS)}

ALPHA = 1.01
PHI_BASE = 0.02
PHI_SLOPE = 0.5
RAMP_FRACTION = 0.1
TC_LEAD = 0.25
RELOCK_DRIFT = 4

# MI per gait, calibrated so the measured oscillation period matches the gait
# table (see tests): wave 100 ticks, tetrapod 60, caterpillar 40.
MI_WAVE = 0.0859268927
MI_TETRAPOD = 0.1695968955
MI_CATERPILLAR = 0.2742613553


@dataclass(frozen=True)
class Gait:
    """One gait's rhythm parameters and inter-leg coordination."""

    name: str
    mi: float
    period: int
    duty: float
    offsets: tuple[float, ...]  # cycle fraction per leg, LEGS order

    def __post_init__(self) -> None:
        if len(self.offsets) != len(LEGS):
            raise ConfigurationError(f"gait {self.name}: need {len(LEGS)} offsets")
        if not all(0.0 <= o < 1.0 for o in self.offsets):
            raise ConfigurationError(f"gait {self.name}: offsets must lie in [0, 1)")
        if not 0.0 < self.duty < 1.0:
            raise ConfigurationError(f"gait {self.name}: duty must lie in (0, 1)")
        if self.period < 4:
            raise ConfigurationError(f"gait {self.name}: period too short")

    def delay_ticks(self, leg: int) -> int:
        return int(round(self.offsets[leg] * self.period))


def default_gait_table() -> dict[str, Gait]:
    """Built-in straight-walking gaits, slowest to fastest."""
    sixth = 1.0 / 6.0
    third = 1.0 / 3.0
    return {
        # single-leg stepping R3, R2, R1, L3, L2, L1
        "wave": Gait(
            "wave", MI_WAVE, 100, 5.0 / 6.0,
            (2 * sixth, sixth, 0.0, 5 * sixth, 4 * sixth, 3 * sixth),
        ),
        # leg pairs {R1,L2} {R2,L3} {R3,L1}
        "tetrapod": Gait(
            "tetrapod", MI_TETRAPOD, 60, 2.0 / 3.0,
            (0.0, third, 2 * third, 2 * third, 0.0, third),
        ),
        # left/right pairs move together
        "caterpillar": Gait(
            "caterpillar", MI_CATERPILLAR, 40, 0.5,
            (0.0, third, 2 * third, 0.0, third, 2 * third),
        ),
    }


class So2Oscillator:
    """Two tanh neurons with a scaled-rotation weight matrix."""

    def __init__(self, mi_range: tuple[float, float] | None = None, alpha: float = ALPHA):
        if mi_range is None:
            table = default_gait_table()
            mi_values = [g.mi for g in table.values()]
            mi_range = (min(mi_values), max(mi_values))
        self.mi_range = mi_range
        self.alpha = alpha
        self.o = np.array([0.1, 0.0])

    def reset(self) -> None:
        self.o = np.array([0.1, 0.0])

    def step(self, mi: float) -> tuple[float, float]:
        lo, hi = self.mi_range
        if not lo <= mi <= hi:
            raise ConfigurationError(f"MI {mi} outside gait-table range [{lo}, {hi}]")
        phi = PHI_BASE + PHI_SLOPE * mi
        c, s = self.alpha * np.cos(phi), self.alpha * np.sin(phi)
        o1 = np.tanh(c * self.o[0] + s * self.o[1])
        o2 = np.tanh(-s * self.o[0] + c * self.o[1])
        self.o = np.array([o1, o2])
        return float(o1), float(o2)


class DelayLine:
    """Fixed-length ring buffer; returns the sample from ``delay`` ticks ago."""

    def __init__(self, delay: int):
        if delay < 0:
            raise ConfigurationError(f"delay must be >= 0, got {delay}")
        self.delay = delay
        self._buf = np.zeros(delay)
        self._idx = 0

    def step(self, sample: float) -> float:
        if self.delay == 0:
            return sample
        out = self._buf[self._idx]
        self._buf[self._idx] = sample
        self._idx = (self._idx + 1) % self.delay
        return float(out)


def trapezoid(pos: float, duty: float, ramp: float = RAMP_FRACTION) -> float:
    """Duty-asymmetric trapezoid over cycle position pos in [0, 1).

    Spends exactly ``duty`` of the cycle below zero (stance), with linear
    ramps of width ``ramp`` centered on the transitions.
    """
    h = ramp / 2.0
    a1 = min(h, duty / 2.0)
    a2 = max(duty - h, duty / 2.0)
    a3 = min(duty + h, duty + (1.0 - duty) / 2.0)
    a4 = max(1.0 - h, duty + (1.0 - duty) / 2.0)
    if pos < a1:
        return -pos / a1 if a1 > 0.0 else -1.0
    if pos < a2:
        return -1.0
    if pos < a3:
        return -1.0 + 2.0 * (pos - a2) / (a3 - a2)
    if pos < a4:
        return 1.0
    return (1.0 - pos) / (1.0 - a4) if a4 < 1.0 else 0.0


class PcpgShaper:
    """Streaming post-processor turning an oscillation into a stance/swing wave.

    Locks onto the input's cycle at rising zero crossings.  Until a cycle has
    been detected the input passes through unchanged.  When ``period`` is
    given, the first crossing anchors that fixed cycle length; otherwise the
    period is measured from crossing intervals.  A crossing observed far from
    the predicted phase re-anchors the cycle.
    """

    def __init__(self, duty: float, period: int | None = None, ramp: float = RAMP_FRACTION):
        if not 0.0 < duty < 1.0:
            raise ConfigurationError(f"duty must lie in (0, 1), got {duty}")
        self.duty = duty
        self.ramp = ramp
        self.period = period
        self.anchor: int | None = None
        self._t = -1
        self._prev: float | None = None
        self._crossings: list[int] = []

    def step(self, o: float) -> float:
        self._t += 1
        rising = self._prev is not None and self._prev <= 0.0 < o
        self._prev = o
        if rising:
            self._on_crossing()
        if self.period is None or self.anchor is None:
            return float(o)
        # half-tick centering keeps the stance tick count at duty * period
        pos = (((self._t - self.anchor) % self.period) + 0.5) / self.period
        return trapezoid(pos, self.duty, self.ramp)

    def _on_crossing(self) -> None:
        if self.period is not None:
            if self.anchor is None:
                self.anchor = self._t
                return
            drift = (self._t - self.anchor) % self.period
            if min(drift, self.period - drift) >= RELOCK_DRIFT:
                self.anchor = self._t
            return
        self._crossings.append(self._t)
        if len(self._crossings) >= 4:
            intervals = np.diff(self._crossings[-4:])
            self.period = max(2, int(round(float(np.mean(intervals)))))
            self.anchor = self._crossings[-1]


@dataclass
class MotorFrame:
    """One tick of motor commands for all legs plus the backbone joint.

    ``ctr``/``tc``/``fti`` hold the rhythmic program in [-1, 1]; the ``*_off``
    arrays carry the adaptation offsets that the plant interprets mechanically
    (depression depth, elevation, forward extension).  ``bj`` is in degrees.
    """

    ctr: np.ndarray
    tc: np.ndarray
    fti: np.ndarray
    ctr_off: np.ndarray = field(default_factory=lambda: np.zeros(len(LEGS)))
    tc_off: np.ndarray = field(default_factory=lambda: np.zeros(len(LEGS)))
    fti_off: np.ndarray = field(default_factory=lambda: np.zeros(len(LEGS)))
    bj: float = -2.0

    def commanded(self) -> np.ndarray:
        """Final joint commands (rhythm + offsets), clipped to [-1, 1]; (3, legs)."""
        stacked = np.stack(
            [self.ctr + self.ctr_off, self.tc + self.tc_off, self.fti + self.fti_off]
        )
        return np.clip(stacked, -1.0, 1.0)

    def stance(self) -> np.ndarray:
        return self.ctr < 0.0


class MotorPipeline:
    """Oscillator plus per-leg delay lines and shapers for one gait."""

    def __init__(self, gait: Gait, oscillator: So2Oscillator | None = None):
        self.gait = gait
        self.osc = oscillator if oscillator is not None else So2Oscillator()
        self.offset_lines = [DelayLine(gait.delay_ticks(i)) for i in range(len(LEGS))]
        self.shapers = [PcpgShaper(gait.duty, period=gait.period) for _ in LEGS]
        tc_delay = int(round((1.0 - TC_LEAD) * gait.period))
        self.tc_lines = [DelayLine(tc_delay) for _ in LEGS]

    def prime_ticks(self) -> int:
        max_delay = max(line.delay for line in self.offset_lines)
        return 2 * self.gait.period + max_delay

    def prime(self) -> None:
        """Run the pipeline until every shaper is locked and lines are full."""
        for _ in range(self.prime_ticks()):
            self.step()

    def step(self) -> MotorFrame:
        o1, _ = self.osc.step(self.gait.mi)
        ctr = np.empty(len(LEGS))
        tc = np.empty(len(LEGS))
        for i in range(len(LEGS)):
            delayed = self.offset_lines[i].step(o1)
            ctr[i] = self.shapers[i].step(delayed)
            tc[i] = self.tc_lines[i].step(ctr[i])
        return MotorFrame(ctr=ctr, tc=tc, fti=-ctr)


def gait_diagram(frames) -> np.ndarray:
    """Stance/swing matrix (legs x ticks): True where the leg is in stance."""
    if len(frames) == 0:
        return np.zeros((len(LEGS), 0), dtype=bool)
    if isinstance(frames[0], MotorFrame):
        ctr = np.stack([f.ctr for f in frames], axis=1)
    else:
        ctr = np.asarray(frames, dtype=float)
        if ctr.shape[0] != len(LEGS):
            ctr = ctr.T
    return ctr < 0.0


def measured_period(signal: np.ndarray, skip: int = 100) -> float:
    """Average interval between rising zero crossings, in ticks."""
    s = np.asarray(signal, dtype=float)[skip:]
    rising = np.flatnonzero((s[:-1] <= 0.0) & (s[1:] > 0.0))
    if len(rising) < 2:
        return float("nan")
    return float((rising[-1] - rising[0]) / (len(rising) - 1))


GAIT_NAMES = GAITS
