"""TOML run configuration: one file with [grid], [channel], [scheme],
[fec], [training], and [evaluate] sections, plus `--set section.key=value`
command-line overrides. Unknown keys are rejected so typos fail loudly."""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .metrics import DEFAULT_CODE_RATE


class ConfigError(ValueError):
    """Configuration file or override is invalid."""


@dataclass
class GridSection:
    n_subcarriers: int = 72
    n_symbols: int = 14
    cp_length: int = 6  # schemes may override (GS always runs CP-less)


@dataclass
class ChannelSection:
    generator: str = "jakes"  # "jakes" | "awgn" | path to a tap trace
    n_taps: int = 5
    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    speed_min_kmh: float = 0.0
    speed_max_kmh: float = 130.0


@dataclass
class SchemeSection:
    id: str = "gs"
    pilot_pattern: str = ""  # empty -> scheme default
    bits_per_re: int = 4
    code_rate: float = DEFAULT_CODE_RATE
    receiver: str = ""       # checkpoint path for neural schemes
    constellation: str = ""  # "qam", checkpoint path, or empty for default


@dataclass
class FecSection:
    alist: str = "builtin"
    codewords_per_frame: int = 3
    interleaver_seed: int = 0x1EAF
    bp_iterations: int = 40


@dataclass
class TrainingSection:
    iterations: int = 20000
    batch_frames: int = 100
    learning_rate: float = 1e-3
    ebn0_min_db: float = 0.0
    ebn0_max_db: float = 15.0
    width: int = 32
    seed: int = 1
    checkpoint_every: int = 1000
    constellation_init: str = "qam"
    optimizer: str = "adam"
    out_dir: str = "train_out"


@dataclass
class EvaluateSection:
    speeds_kmh: list = field(default_factory=lambda: [3.6, 36.0, 108.0])
    ebn0_grid_db: list = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0, 10.0, 12.0])
    esn0_grid_db: list = field(default_factory=list)  # used instead when non-empty
    frames: int = 200
    max_frame_errors: int = 200
    seed: int = 1
    output: str = "results.csv"


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    scheme: SchemeSection = field(default_factory=SchemeSection)
    fec: FecSection = field(default_factory=FecSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _apply(section_obj, key, value, where):
    valid = {f.name: f.type for f in fields(section_obj)}
    if key not in valid:
        raise ConfigError(f"{where}: unknown key {key!r} (valid: {sorted(valid)})")
    current = getattr(section_obj, key)
    if isinstance(current, bool):
        value = bool(value)
    elif isinstance(current, int) and not isinstance(value, bool):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{where}: {key} expects an integer, got {value!r}")
        value = int(value)
    elif isinstance(current, float):
        value = float(value)
    elif isinstance(current, str):
        value = str(value)
    elif isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: {key} expects a list, got {value!r}")
        value = [float(v) for v in value]
    setattr(section_obj, key, value)


def load_config(path=None, overrides=()) -> RunConfig:
    """Parse the TOML file (optional) and apply `section.key=value` overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        for section, entries in data.items():
            if section not in _SECTIONS:
                raise ConfigError(f"{path}: unknown section [{section}] (valid: {sorted(_SECTIONS)})")
            if not isinstance(entries, dict):
                raise ConfigError(f"{path}: [{section}] must be a table")
            for key, value in entries.items():
                _apply(getattr(cfg, section), key, value, f"{path} [{section}]")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"override {item!r}: unknown section {section!r}")
        try:
            value = ast.literal_eval(raw)
        except (ValueError, SyntaxError):
            value = raw
        _apply(getattr(cfg, section), key, value, f"override {item!r}")
    return cfg
