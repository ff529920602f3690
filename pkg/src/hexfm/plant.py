"""1-D kinematic walker standing in for a physics simulation.

The body is a point ``body_x`` (its front edge) advancing along a segment
terrain.  Feet live at ``attach + reach`` where attach is the leg's mounting
offset and reach grows with the adaptation offsets carried in the motor
frame.  The plant converts motor frames into per-leg ground-contact signals:

* stance (rhythm command below zero) on solid ground raises contact to 1 a
  gait-specific lag after stance onset and drops it at stance end,
* a foot over a gap never gets contact; a landing beyond a gap counts only
  with a safety margin past the far edge,
* rough segments delay contact onset (more on elastic ground) and drop
  contact randomly unless the leg is pressing down hard enough (searching),
* obstacles are thin walls: a swing that cannot clear one strikes it
  (contact spikes during swing) and the following stance finds no firm
  foothold.

The body advances a fixed step per tick while at least three stance legs
have contact, unless a gap ahead lacks a front-leg anchor on its far side or
an unclimbed wall is in the way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpg import LEGS, MotorFrame
from .errors import ConfigurationError, InputError

TICK_SECONDS = 0.037
BODY_LENGTH = 34.0
LEG_LENGTH = 17.5
STEP_ADVANCE = 0.5
GAP_MARGIN = 1.5
CROSSABLE_GAP = 15.0
TRAIL_MAX = 8.0
WALL_STANDOFF = 0.5

REACH_BASE = 0.6
REACH_BJ = 0.02
REACH_JOINT = 0.3
REACH_CAP = 0.95
CLEAR_BASE = 0.35
CLEAR_ELEV = 0.6
CLEAR_BJ = 0.02

ROUGH_DROPOUT_P = 0.3
ROUGH_SEARCH_DROPOUT = 0.09
ROUGH_BASE_DELAY = 12
ROUGH_ELASTIC_DELAY = 2.0
SEARCH_DEPTH_PER_ELASTIC = 0.04
SEARCH_DEPTH_MAX = 0.45
MIN_PROPEL_LEGS = 3

FRONT_LEGS = (0, 3)  # R1, L1
ATTACH_OFFSET = np.array([0.0, -BODY_LENGTH / 2, -BODY_LENGTH, 0.0, -BODY_LENGTH / 2, -BODY_LENGTH])


def lag_model(gait: str) -> int:
    """Contact-onset lag after stance onset, in ticks; faster gaits lag less."""
    lags = {"wave": 8, "tetrapod": 5, "caterpillar": 3}
    try:
        return lags[gait]
    except KeyError:
        raise ConfigurationError(f"unknown gait {gait!r}") from None


@dataclass(frozen=True)
class Segment:
    kind: str
    start: float
    length: float
    height: float = 0.0
    elasticity: float = 1.0
    count: int = 1

    @property
    def end(self) -> float:
        return self.start + self.length

    @property
    def crossable(self) -> bool:
        return self.kind != "gap" or self.length <= CROSSABLE_GAP


class Terrain:
    """Sorted, non-overlapping segment list; anything uncovered is flat."""

    def __init__(self, segments: list[Segment]):
        segments = sorted(segments, key=lambda s: s.start)
        for a, b in zip(segments, segments[1:]):
            if a.end > b.start + 1e-9:
                raise ConfigurationError(
                    f"overlapping terrain segments at {a.end} / {b.start}"
                )
        self.segments = segments
        self.walls: list[tuple[float, float]] = []
        for seg in segments:
            if seg.kind == "obstacle":
                self.walls.append((seg.start, seg.height))
            elif seg.kind == "stairs":
                for k in range(seg.count):
                    self.walls.append((seg.start + k * BODY_LENGTH, seg.height))
        self.walls.sort()

    @classmethod
    def from_segment_list(cls, entries: list[tuple]) -> "Terrain":
        """Build from (kind, length[, height, elasticity, count]) tuples laid end to end."""
        segments = []
        x = 0.0
        for entry in entries:
            kind = entry[0]
            if kind == "flat":
                x += float(entry[1])
                continue
            if kind == "gap":
                seg = Segment("gap", x, float(entry[1]))
            elif kind == "rough":
                seg = Segment("rough", x, float(entry[1]), height=float(entry[2]), elasticity=float(entry[3]))
            elif kind == "obstacle":
                seg = Segment("obstacle", x, 0.0, height=float(entry[1]))
            elif kind == "stairs":
                count = int(entry[2])
                seg = Segment("stairs", x, count * BODY_LENGTH, height=float(entry[1]), count=count)
            else:
                raise ConfigurationError(f"unknown terrain segment kind {kind!r}")
            segments.append(seg)
            x = seg.end
        return cls(segments)

    def gap_at(self, x: float) -> Segment | None:
        for seg in self.segments:
            if seg.kind == "gap" and seg.start < x < seg.end:
                return seg
        return None

    def rough_at(self, x: float) -> Segment | None:
        for seg in self.segments:
            if seg.kind == "rough" and seg.start <= x < seg.end:
                return seg
        return None

    def gap_blocking(self, spot: float) -> Segment | None:
        """Gap making a landing at ``spot`` unsafe (inside it or short of the margin)."""
        for seg in self.segments:
            if seg.kind == "gap" and seg.start < spot < seg.end + GAP_MARGIN:
                return seg
        return None

    def walls_between(self, x0: float, x1: float) -> list[tuple[float, float]]:
        return [(p, h) for p, h in self.walls if x0 < p <= x1]

    def challenge_end(self) -> float:
        ends = [seg.end for seg in self.segments if seg.kind != "flat"]
        return max(ends) if ends else 0.0


@dataclass
class LegState:
    foot_x: float
    planted: bool = True
    in_stance: bool = True
    stance_ticks: int = 0
    contact: float = 0.0
    scrabble: bool = False          # landed against a wall, no firm foothold
    swing_wall: float | None = None  # wall currently blocking the swing


@dataclass
class Corruption:
    """Efference-copy corruption over a tick window [t0, t1)."""

    kind: str  # "gaussian_noise" | "dropout"
    t0: int
    t1: int
    percent: float = 0.0

    def validate(self, run_length: int) -> None:
        if self.kind not in ("gaussian_noise", "dropout"):
            raise ConfigurationError(f"unknown corruption kind {self.kind!r}")
        if not 0 <= self.t0 <= self.t1 <= run_length:
            raise ConfigurationError(
                f"corruption window [{self.t0}, {self.t1}) outside run of {run_length}"
            )


def inject_corruption(stream: np.ndarray, corruption: Corruption | None, seed: int = 0) -> np.ndarray:
    """Apply a corruption window to a signal; outside the window it is untouched."""
    out = np.array(stream, dtype=float, copy=True)
    if corruption is None:
        return out
    corruption.validate(len(out))
    sl = slice(corruption.t0, corruption.t1)
    if corruption.kind == "dropout":
        out[sl] = 0.0
    else:
        signal_range = 2.0  # commands live in [-1, 1]
        sigma = corruption.percent / 100.0 * signal_range
        rng = np.random.default_rng(seed)
        out[sl] += rng.normal(0.0, sigma, out[sl].shape)
    return out


class Plant:
    """Walker state: body position, per-leg feet and contact generation.

    ``stance_len`` (the gait's nominal stance duration in ticks) enables the
    half-contact shoulder ticks at contact onset and release, modeling finite
    sensor loading; without it contact is a plain lagged square wave.
    """

    def __init__(
        self,
        terrain: Terrain,
        gait: str,
        seed: int = 0,
        body_x: float = 0.0,
        stance_len: int | None = None,
    ):
        self.terrain = terrain
        self.gait = gait
        self.lag = lag_model(gait)
        self.stance_len = stance_len
        self.body_x = body_x
        self.rng = np.random.default_rng(seed)
        self.legs = [
            LegState(foot_x=body_x + ATTACH_OFFSET[i], stance_ticks=self.lag)
            for i in range(len(LEGS))
        ]

    # -- geometry helpers ---------------------------------------------------

    def attach(self, leg: int) -> float:
        return self.body_x + ATTACH_OFFSET[leg]

    def reach(self, leg: int, frame: MotorFrame) -> float:
        ext = REACH_BASE
        ext += REACH_JOINT * max(0.0, frame.tc_off[leg])
        ext += REACH_JOINT * max(0.0, frame.fti_off[leg])
        if leg in FRONT_LEGS:
            ext += REACH_BJ * max(0.0, -frame.bj)
        return LEG_LENGTH * min(REACH_CAP, ext)

    def clearance(self, leg: int, frame: MotorFrame) -> float:
        lift = CLEAR_BASE + CLEAR_ELEV * max(0.0, frame.ctr_off[leg])
        if leg in FRONT_LEGS:
            lift += CLEAR_BJ * max(0.0, frame.bj)
        return LEG_LENGTH * lift

    def _front_anchor_past(self, x: float) -> bool:
        return any(
            self.legs[i].planted and self.legs[i].foot_x >= x for i in FRONT_LEGS
        )

    def _blocking_gap(self) -> Segment | None:
        """Gap immediately ahead (or underfoot) lacking a far-side front anchor."""
        for seg in self.terrain.segments:
            if seg.kind != "gap":
                continue
            if self.body_x < seg.start - 1e-9:
                continue
            if self.body_x >= seg.end + GAP_MARGIN:
                continue
            if not self._front_anchor_past(seg.end):
                return seg
        return None

    def _blocking_wall(self) -> float | None:
        for pos, _height in self.terrain.walls:
            if self.body_x <= pos and not self._front_anchor_past(pos):
                return pos
        return None

    def _wall_cleared_by_mate(self, leg: int, pos: float) -> bool:
        """Legs behind an already-planted leg step over the wall freely."""
        for j in range(len(LEGS)):
            if ATTACH_OFFSET[j] > ATTACH_OFFSET[leg] + 1e-9:
                if self.legs[j].planted and self.legs[j].foot_x >= pos:
                    return True
        return False

    # -- per-tick update ------------------------------------------------------

    def step(self, frame: MotorFrame) -> np.ndarray:
        """Advance one tick; returns the 6-vector of foot-contact signals."""
        stance = frame.stance()
        gap_block = self._blocking_gap()
        fc = np.zeros(len(LEGS))

        for i, leg in enumerate(self.legs):
            if stance[i] and not leg.in_stance:
                self._land(i, leg, frame, gap_block)
            elif stance[i]:
                leg.stance_ticks += 1
                if not leg.planted and not leg.scrabble:
                    self._track_reach(i, leg, frame)
            elif leg.in_stance:
                # stance -> swing
                leg.planted = False
                leg.scrabble = False
                leg.swing_wall = None
                leg.stance_ticks = 0
            leg.in_stance = bool(stance[i])
            if not leg.in_stance:
                fc[i] = self._swing_tick(i, leg, frame)
            else:
                fc[i] = self._stance_contact(i, leg, frame)
            leg.contact = fc[i]

        self._advance(stance, fc)
        return fc

    def _land(self, i: int, leg: LegState, frame: MotorFrame, gap_block: Segment | None) -> None:
        leg.stance_ticks = 0
        leg.scrabble = False
        if leg.swing_wall is not None:
            # swing ended against a wall: no firm foothold this stance
            leg.foot_x = leg.swing_wall - WALL_STANDOFF
            leg.planted = False
            leg.scrabble = True
            leg.swing_wall = None
            return
        preferred = self.attach(i) + self.reach(i, frame)
        gap = self.terrain.gap_blocking(preferred)
        if gap is None:
            leg.foot_x = preferred
            leg.planted = True
            return
        reaching = (
            i in FRONT_LEGS and gap_block is not None and gap.start == gap_block.start
        )
        if not reaching and gap.start >= self.attach(i) - TRAIL_MAX:
            # retract onto the near platform edge
            leg.foot_x = gap.start
            leg.planted = True
            return
        # hang over the void at full extension; searching may secure it later
        leg.foot_x = preferred
        leg.planted = False

    def _track_reach(self, i: int, leg: LegState, frame: MotorFrame) -> None:
        leg.foot_x = self.attach(i) + self.reach(i, frame)
        if self.terrain.gap_blocking(leg.foot_x) is None:
            leg.planted = True

    def _stance_contact(self, i: int, leg: LegState, frame: MotorFrame) -> float:
        if not leg.planted or leg.scrabble:
            return 0.0
        rough = self.terrain.rough_at(leg.foot_x)
        if rough is None:
            if self.stance_len is not None:
                if leg.stance_ticks == self.lag - 1:
                    return 0.5  # sensor loading
                if leg.stance_ticks == self.stance_len - 1 and leg.stance_ticks >= self.lag:
                    return 0.5  # sensor release
            if leg.stance_ticks < self.lag:
                return 0.0
            return 1.0
        if leg.stance_ticks < self.lag:
            return 0.0
        depth = max(0.0, -frame.ctr_off[i])
        needed = min(SEARCH_DEPTH_MAX, SEARCH_DEPTH_PER_ELASTIC * rough.elasticity)
        searching = depth >= needed
        extra = ROUGH_BASE_DELAY + ROUGH_ELASTIC_DELAY * (rough.elasticity - 1.0)
        settled = leg.stance_ticks >= self.lag + int(round(extra))
        if not (settled or searching):
            return 0.0
        p_drop = ROUGH_SEARCH_DROPOUT if searching else ROUGH_DROPOUT_P
        if self.rng.random() < p_drop:
            return 0.0
        return 1.0

    def _swing_tick(self, i: int, leg: LegState, frame: MotorFrame) -> float:
        target = self.attach(i) + self.reach(i, frame)
        clearance = self.clearance(i, frame)
        if leg.swing_wall is not None:
            # retry against the wall until elevation clears it
            height = next(
                (h for p, h in self.terrain.walls if p == leg.swing_wall), 0.0
            )
            if clearance >= height or self._wall_cleared_by_mate(i, leg.swing_wall):
                leg.swing_wall = None
                leg.foot_x = target
                return 0.0
            leg.foot_x = leg.swing_wall - WALL_STANDOFF
            return 1.0
        for pos, height in self.terrain.walls_between(leg.foot_x, target):
            if clearance < height and not self._wall_cleared_by_mate(i, pos):
                leg.swing_wall = pos
                leg.foot_x = pos - WALL_STANDOFF
                return 1.0
        leg.foot_x = target
        rough = self.terrain.rough_at(leg.foot_x)
        if rough is not None and clearance < rough.height:
            # scuffing an undulation mid-swing
            return 1.0
        return 0.0

    def _advance(self, stance: np.ndarray, fc: np.ndarray) -> None:
        support = int(np.sum(stance & (fc >= 0.5)))
        if support < MIN_PROPEL_LEGS:
            return
        new_x = self.body_x + STEP_ADVANCE
        gap = self._blocking_gap()
        if gap is not None:
            new_x = min(new_x, gap.start)
        wall = self._blocking_wall()
        if wall is not None:
            new_x = min(new_x, wall)
        self.body_x = max(self.body_x, new_x)


def progress_metrics(body_trace: np.ndarray, terrain: Terrain) -> dict:
    """Success data for a completed run: did the body clear the last challenge."""
    body_trace = np.asarray(body_trace, dtype=float)
    if body_trace.size == 0:
        raise InputError("empty body trace")
    goal = terrain.challenge_end() + 1.0
    past = np.flatnonzero(body_trace >= goal)
    success = past.size > 0
    tick = int(past[0]) if success else -1
    return {
        "success": success,
        "success_tick": tick,
        "success_seconds": tick * TICK_SECONDS if success else float("nan"),
        "distance": float(body_trace[-1]),
    }
