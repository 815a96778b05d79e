"""Run configuration: one JSON file, strict about field names, with flag overrides on top."""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .disorder import distribution_from_json
from .errors import ConfigError, DomainError
from .harness import Model
from .operator import InteractionSpec

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
]


@dataclass
class InteractionConfig:
    r0: int = 0
    u0: float = 0.0
    values: Optional[list] = None


@dataclass
class ModelConfig:
    d: int = 1
    N: int = 1
    g: float = 10.0
    distribution: dict = field(default_factory=lambda: {"kind": "uniform", "a": -1.0, "b": 1.0})
    interaction: Optional[InteractionConfig] = None


@dataclass
class ScheduleConfig:
    L0: int = 8
    k_max: int = 1


@dataclass
class ClassificationConfig:
    beta: float = 0.5
    p: float = 2.0
    cnr_scan_radius: Optional[int] = None
    cnr_mode: str = "exhaustive"


@dataclass
class OutputConfig:
    format: str = "json"
    path: Optional[str] = None


@dataclass
class BoxConfig:
    L: int = 8
    center: Optional[list] = None
    seed: Optional[int] = None
    # explicit V(x) on the box support, in Box.support() order
    potential: Optional[list] = None


@dataclass
class WegnerConfig:
    L: int = 1
    epsilon: float = 1e-3
    beta: float = 0.5
    beta_prime: float = 0.5


@dataclass
class SuiteConfig:
    instances: int = 100
    seed: int = 0
    tolerance: float = 1e-10


@dataclass
class DescentConfig:
    instances: int = 500
    seed: int = 0
    A: int = 4


@dataclass
class MPConfig:
    L_small: int = 2
    L_big: int = 5
    center: Optional[list] = None


@dataclass
class SpectrumConfig:
    left: list = field(default_factory=lambda: [0])
    right: list = field(default_factory=lambda: [10])
    L: int = 2
    seed: int = 0
    m_factor: Optional[float] = None
    m_total: Optional[float] = None


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    E: float = 0.0
    m: float = 0.5
    m1: Optional[float] = None
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    classification: ClassificationConfig = field(default_factory=ClassificationConfig)
    trials: int = 500
    base_seed: int = 0
    threads: Optional[int] = None
    max_sites: int = 4096
    output: OutputConfig = field(default_factory=OutputConfig)
    box: BoxConfig = field(default_factory=BoxConfig)
    wegner: WegnerConfig = field(default_factory=WegnerConfig)
    gri: SuiteConfig = field(default_factory=SuiteConfig)
    descent: DescentConfig = field(default_factory=DescentConfig)
    mp: MPConfig = field(default_factory=MPConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)

    def build_model(self) -> Model:
        mc = self.model
        try:
            dist = distribution_from_json(mc.distribution)
            inter = None
            if mc.interaction is not None:
                ic = mc.interaction
                inter = InteractionSpec(ic.r0, ic.u0, tuple(ic.values) if ic.values else None)
            return Model(mc.d, mc.N, mc.g, dist, inter)
        except (DomainError, KeyError, TypeError) as exc:
            raise ConfigError(f"model: {exc}") from None

    def mass(self) -> float:
        """``m``, or ``m^(N)`` of the mass sequence when ``m1`` is given."""
        if self.m1 is None:
            return self.m
        from .harness import MassSequence

        try:
            return MassSequence(self.m1, self.schedule.L0, self.model.N)[self.model.N]
        except DomainError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> "RunConfig":
        checks = [
            (self.model.d >= 1, "model.d must be >= 1"),
            (self.model.N >= 1, "model.N must be >= 1"),
            (self.m > 0, "m must be > 0"),
            (self.m1 is None or self.m1 > 0, "m1 must be > 0"),
            (self.schedule.L0 >= 2, "schedule.L0 must be >= 2"),
            (self.schedule.k_max >= 0, "schedule.k_max must be >= 0"),
            (0 < self.classification.beta < 1, "classification.beta must lie in (0, 1)"),
            (self.classification.cnr_mode in ("exhaustive", "stride"),
             "classification.cnr_mode must be 'exhaustive' or 'stride'"),
            (self.trials >= 0, "trials must be >= 0"),
            (0 <= self.base_seed < 2 ** 64, "base_seed must be a 64-bit unsigned integer"),
            (self.threads is None or self.threads >= 1, "threads must be >= 1"),
            (self.max_sites >= 1, "max_sites must be >= 1"),
            (self.output.format in ("json", "csv"), "output.format must be 'json' or 'csv'"),
            (self.box.L >= 1, "box.L must be >= 1"),
            (self.wegner.L >= 1, "wegner.L must be >= 1"),
            (self.wegner.epsilon >= 0, "wegner.epsilon must be >= 0"),
            (self.mp.L_big > self.mp.L_small >= 1, "mp needs L_big > L_small >= 1"),
            (self.spectrum.L >= 1, "spectrum.L must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config field {(where + '.' if where else '') + key!r}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}" if where else name)
    return cls(**kwargs)


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if tp in (list, dict) or origin in (list, dict):
        base = origin or tp
        if not isinstance(value, base):
            raise ConfigError(f"{where}: expected a {base.__name__}")
        return value
    return value


def parse_config(data: dict) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(data)
