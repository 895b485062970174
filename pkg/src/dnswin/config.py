"""Flat ``key = value`` run configuration with command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .network import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    data: str = "synthetic"
    n_train: int = 20
    n_val: int = 5
    image_size: int = 64
    val_sigma: float = 25.0


SECTIONS = (ModelConfig, TrainConfig, DataConfig)
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _field_types():
    out = {}
    for cls in SECTIONS:
        for f in fields(cls):
            out[f.name] = (cls, f.type if isinstance(f.type, str) else f.type.__name__)
    return out


def parse_text(text):
    """``key = value`` lines, ``#`` comments, blank lines ignored."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value
    return values


def _convert(key, value, typ):
    try:
        if typ == "bool":
            v = value.strip().lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(value)
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ}") from None


@dataclass
class RunConfig:
    subcommand: str
    config_path: str | None = None
    seed: int | None = None
    overrides: list = field(default_factory=list)

    def values(self):
        vals = {}
        if self.config_path:
            try:
                with open(self.config_path, encoding="utf-8") as fh:
                    vals.update(parse_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"cannot read config {self.config_path}: {exc}") from exc
        for item in self.overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            vals[k.strip()] = v.strip()
        if self.seed is not None:
            vals["seed"] = str(self.seed)
        return vals

    def resolve(self):
        """-> (ModelConfig, TrainConfig, DataConfig); unknown keys are an error."""
        types = _field_types()
        per_section = {cls: {} for cls in SECTIONS}
        for key, raw in self.values().items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            cls, typ = types[key]
            per_section[cls][key] = _convert(key, raw, typ)
        try:
            return tuple(cls(**per_section[cls]) for cls in SECTIONS)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def dump(*configs):
    lines = []
    for cfg in configs:
        for f in fields(cfg):
            lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
