"""Run configuration: INI-style sections mapped onto dataclasses.

Parsing is strict: unknown sections or keys are rejected. Units are SI
except PGA values (g) and the partition boundary (cm).
"""
from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunSection:
    seed: int = 0
    out_dir: str = "runs/default"


@dataclass
class SystemSection:
    m: float = 1.0
    c: float = 1.0
    k1: float = 20.0
    k2: float = 200.0
    gamma: float = 1.0


@dataclass
class MotionsSection:
    count: int = 100
    duration: float = 50.0
    dt: float = 0.05
    f_lo: float = 0.1
    f_hi: float = 5.0
    pga_min_g: float = 0.1
    pga_max_g: float = 0.5
    taper: float = 0.2


@dataclass
class ArchitectureSection:
    conv_filters: tuple = (16, 16, 16)
    conv_kernels: tuple = (17, 17, 17)
    fc_hidden: tuple = (32,)
    dropout: float = 0.0
    time_reversed: bool = True


@dataclass
class TrainingSection:
    epochs: int = 1500
    lr: float = 1e-3
    lambda_data: float = 1.0
    lambda_phys: float = 1.0
    patience: int = 0
    scaling: str = "maxabs"
    loss_units: str = "physical"


@dataclass
class PartitionSection:
    method: str = "random"
    n_train: int = 10
    n_validation: int = 0
    k: int = 4
    boundary_cm: float = 1.0
    restarts: int = 10
    k_max: int = 8


@dataclass
class FragilitySection:
    suite_size: int = 100
    pga_min_g: float = 0.05
    pga_max_g: float = 0.6
    drift_threshold: float = 0.005
    story_height: float = 20.0
    scale_factors: tuple = (1.0,)
    response: str = "surrogate"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    system: SystemSection = field(default_factory=SystemSection)
    motions: MotionsSection = field(default_factory=MotionsSection)
    architecture: ArchitectureSection = field(default_factory=ArchitectureSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    fragility: FragilitySection = field(default_factory=FragilitySection)

    def validate(self):
        if self.partition.method not in ("random", "kmeans"):
            raise ConfigError(f"unknown partition method {self.partition.method!r}")
        if self.fragility.response not in ("surrogate", "simulator"):
            raise ConfigError(f"unknown fragility response source {self.fragility.response!r}")
        if len(self.architecture.conv_filters) != len(self.architecture.conv_kernels):
            raise ConfigError("conv_filters and conv_kernels must have equal length")
        if self.motions.count < 1:
            raise ConfigError("motions.count must be >= 1")
        if not (0 < self.motions.pga_min_g <= self.motions.pga_max_g):
            raise ConfigError("motion PGA range invalid")
        return self


def _section_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _parse_value(raw: str, default, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(v) for v in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    sections = {f.name for f in dataclasses.fields(RunConfig)}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        section = getattr(cfg, name)
        known = _section_types(type(section))
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key}")
            setattr(section, key, _parse_value(raw, getattr(section, key), f"{name}.{key}"))
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text())


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for sec in dataclasses.fields(RunConfig):
        section = getattr(cfg, sec.name)
        lines.append(f"[{sec.name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_format_value(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)
