"""Run configuration: defaults, scenario presets, INI-style config files.

A config file uses plain key = value sections::

    [run]
    scenario = gap_double      ; train_flat | gap_double | rough_elastic |
                               ; obstacle | stairs
    model = reservoir          ; reservoir | baseline
    seed = 7
    ticks = 6000
    trials = 10
    out = out

    [reservoir]
    size = 30
    gain = 0.95
    p_connect = 0.2
    tau_init = 2.0
    input_range = 0.1
    bias_range = 0.1

    [readout]
    delta_c = 1.0

    [gains]
    k_search = 0.1
    k_elev = 0.1
    deadband = 0.1
    theta_bj = 0.5
    k_bj = 2.0

    [gait.wave]                ; optional per-gait overrides
    mi = 0.0859268927
    period = 100
    duty = 0.8333
    offsets = 0.3333 0.1667 0.0 0.8333 0.6667 0.5

    [terrain]                  ; optional override of the scenario terrain
    segments = flat:95 gap:15 flat:100 gap:11 flat:60

    [corruption]               ; optional efference-copy corruption
    kind = gaussian_noise      ; gaussian_noise | dropout
    window = 300 350
    percent = 2.0

Terrain segments are laid end to end: ``flat:LEN``, ``gap:LEN``,
``rough:LEN:OBSTACLE_HEIGHT:ELASTICITY``, ``obstacle:HEIGHT``,
``stairs:STEP_HEIGHT:COUNT`` (lengths and heights in cm).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .control import ControlGains
from .cpg import Gait, default_gait_table
from .errors import ConfigurationError
from .plant import Corruption
from .reservoir import ReservoirParams

TRAIN_BLOCK_TICKS = 2500
TRAIN_CYCLES = 3
PRETRAIN_EPOCHS = 20

SCENARIOS = ("train_flat", "gap_double", "rough_elastic", "obstacle", "stairs")
MODELS = ("reservoir", "baseline")


@dataclass
class RunConfig:
    scenario: str = "train_flat"
    model: str = "reservoir"
    seed: int = 7
    ticks: int = 6000
    trials: int = 10
    out_dir: str = "out"
    elasticity: float = 1.0
    obstacle_height: float = 15.0
    stair_height: float = 8.0
    stair_count: int = 3
    adaptation: bool = True
    delta_c: float = 1e-4
    readout_noise: float = 1e-3
    block_ticks: int = TRAIN_BLOCK_TICKS
    cycles: int = TRAIN_CYCLES
    pretrain_epochs: int = PRETRAIN_EPOCHS
    reservoir: ReservoirParams = field(default_factory=ReservoirParams)
    gains: ControlGains = field(default_factory=ControlGains)
    gait_table: dict[str, Gait] = field(default_factory=default_gait_table)
    terrain_segments: list[tuple] | None = None
    corruption: Corruption | None = None

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.ticks < 1:
            raise ConfigurationError(f"ticks must be >= 1, got {self.ticks}")
        if self.cycles < 1:
            raise ConfigurationError(f"cycles must be >= 1, got {self.cycles}")
        if self.delta_c <= 0:
            raise ConfigurationError(f"delta_c must be > 0, got {self.delta_c}")
        self.reservoir.validate()

    def scenario_preset(self) -> dict:
        """Terrain, gait and control flags bound to the configured scenario."""
        presets = {
            "train_flat": {
                "gait": "wave",
                "terrain": [("flat", 10000.0)],
                "bj_enabled": False,
            },
            "gap_double": {
                "gait": "caterpillar",
                "terrain": [
                    ("flat", 95.0),
                    ("gap", 15.0),
                    ("flat", 100.0),
                    ("gap", 11.0),
                    ("flat", 60.0),
                ],
                "bj_enabled": True,
            },
            "rough_elastic": {
                "gait": "tetrapod",
                "terrain": [
                    ("flat", 20.0),
                    ("rough", 200.0, 8.0, self.elasticity),
                    ("flat", 40.0),
                ],
                "bj_enabled": False,
            },
            "obstacle": {
                "gait": "wave",
                "terrain": [
                    ("flat", 40.0),
                    ("obstacle", self.obstacle_height),
                    ("flat", 40.0),
                ],
                "bj_enabled": True,
            },
            "stairs": {
                "gait": "wave",
                "terrain": [
                    ("flat", 40.0),
                    ("stairs", self.stair_height, self.stair_count),
                    ("flat", 40.0),
                ],
                "bj_enabled": True,
            },
        }
        preset = presets[self.scenario]
        if self.terrain_segments is not None:
            preset = {**preset, "terrain": self.terrain_segments}
        return preset

    def effective_text(self) -> str:
        """Full flattened key=value echo, embedded in every output."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "reservoir":
                for sub in fields(value):
                    lines.append(f"reservoir.{sub.name}={getattr(value, sub.name)}")
            elif f.name == "gains":
                for sub in fields(value):
                    lines.append(f"gains.{sub.name}={getattr(value, sub.name)}")
            elif f.name == "gait_table":
                for name, gait in value.items():
                    offs = " ".join(f"{o:.6f}" for o in gait.offsets)
                    lines.append(
                        f"gait.{name}=mi:{gait.mi} period:{gait.period} "
                        f"duty:{gait.duty} offsets:{offs}"
                    )
            elif f.name == "terrain_segments":
                if value is not None:
                    lines.append(
                        "terrain=" + " ".join(":".join(str(x) for x in seg) for seg in value)
                    )
            elif f.name == "corruption":
                if value is not None:
                    lines.append(
                        f"corruption={value.kind}:{value.t0}:{value.t1}:{value.percent}"
                    )
            else:
                lines.append(f"{f.name}={value}")
        return "\n".join(lines)


def parse_terrain_field(text: str) -> list[tuple]:
    entries = []
    for token in text.replace(",", " ").split():
        parts = token.split(":")
        kind = parts[0]
        if kind in ("flat", "gap"):
            entries.append((kind, float(parts[1])))
        elif kind == "rough":
            entries.append((kind, float(parts[1]), float(parts[2]), float(parts[3])))
        elif kind == "obstacle":
            entries.append((kind, float(parts[1])))
        elif kind == "stairs":
            entries.append((kind, float(parts[1]), int(parts[2])))
        else:
            raise ConfigurationError(f"unknown terrain segment {token!r}")
    return entries


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Default config, optionally updated from an INI file and CLI overrides."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
        if parser.has_section("run"):
            run = parser["run"]
            cfg.scenario = run.get("scenario", cfg.scenario)
            cfg.model = run.get("model", cfg.model)
            cfg.seed = run.getint("seed", cfg.seed)
            cfg.ticks = run.getint("ticks", cfg.ticks)
            cfg.trials = run.getint("trials", cfg.trials)
            cfg.out_dir = run.get("out", cfg.out_dir)
            cfg.elasticity = run.getfloat("elasticity", cfg.elasticity)
            cfg.obstacle_height = run.getfloat("obstacle_height", cfg.obstacle_height)
            cfg.stair_height = run.getfloat("stair_height", cfg.stair_height)
            cfg.stair_count = run.getint("stair_count", cfg.stair_count)
            cfg.adaptation = run.getboolean("adaptation", cfg.adaptation)
            cfg.cycles = run.getint("cycles", cfg.cycles)
            cfg.block_ticks = run.getint("block_ticks", cfg.block_ticks)
            cfg.pretrain_epochs = run.getint("pretrain_epochs", cfg.pretrain_epochs)
        if parser.has_section("reservoir"):
            res = parser["reservoir"]
            cfg.reservoir = ReservoirParams(
                size=res.getint("size", cfg.reservoir.size),
                gain=res.getfloat("gain", cfg.reservoir.gain),
                p_connect=res.getfloat("p_connect", cfg.reservoir.p_connect),
                dt=res.getfloat("dt", cfg.reservoir.dt),
                tau_init=res.getfloat("tau_init", cfg.reservoir.tau_init),
                input_range=res.getfloat("input_range", cfg.reservoir.input_range),
                bias_range=res.getfloat("bias_range", cfg.reservoir.bias_range),
                seed=cfg.seed,
            )
        if parser.has_section("readout"):
            cfg.delta_c = parser["readout"].getfloat("delta_c", cfg.delta_c)
            cfg.readout_noise = parser["readout"].getfloat("noise", cfg.readout_noise)
        if parser.has_section("gains"):
            g = parser["gains"]
            cfg.gains = ControlGains(
                k_search=g.getfloat("k_search", cfg.gains.k_search),
                k_elev=g.getfloat("k_elev", cfg.gains.k_elev),
                k_gap=g.getfloat("k_gap", cfg.gains.k_gap),
                offset_clip=g.getfloat("offset_clip", cfg.gains.offset_clip),
                deadband=g.getfloat("deadband", cfg.gains.deadband),
                theta_bj=g.getfloat("theta_bj", cfg.gains.theta_bj),
                k_bj=g.getfloat("k_bj", cfg.gains.k_bj),
                bj_step_cap=g.getfloat("bj_step_cap", cfg.gains.bj_step_cap),
                bj_up_timeout=g.getint("bj_up_timeout", cfg.gains.bj_up_timeout),
                bj_down_timeout=g.getint("bj_down_timeout", cfg.gains.bj_down_timeout),
            )
        for name in list(cfg.gait_table):
            section = f"gait.{name}"
            if parser.has_section(section):
                sec = parser[section]
                base = cfg.gait_table[name]
                offsets = base.offsets
                if "offsets" in sec:
                    offsets = tuple(float(x) for x in sec["offsets"].split())
                cfg.gait_table[name] = Gait(
                    name,
                    sec.getfloat("mi", base.mi),
                    sec.getint("period", base.period),
                    sec.getfloat("duty", base.duty),
                    offsets,
                )
        if parser.has_section("terrain") and "segments" in parser["terrain"]:
            cfg.terrain_segments = parse_terrain_field(parser["terrain"]["segments"])
        if parser.has_section("corruption"):
            sec = parser["corruption"]
            t0, t1 = (int(x) for x in sec["window"].split())
            cfg.corruption = Corruption(
                kind=sec.get("kind", "gaussian_noise"),
                t0=t0,
                t1=t1,
                percent=sec.getfloat("percent", 2.0),
            )
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.reservoir.seed = cfg.seed
    cfg.validate()
    return cfg
