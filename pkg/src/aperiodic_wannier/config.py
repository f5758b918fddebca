"""Experiment configuration: TOML in, validated dataclasses, TOML/JSON out.

The schema is flat tables of scalars and short lists; unknown keys and wrong
types are hard errors carrying the dotted key path.  ``config_hash`` is a
stable digest of the canonical JSON form and goes into every run manifest.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib  # python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class ModelConfig:
    kind: str = "hofstadter"
    L: int = 24
    p: int = 1
    q: int = 3
    t: float = -1.0
    stagger: float = 1.0


@dataclass
class GenerateConfig:
    kind: str = "square"
    window: list = field(default_factory=lambda: [0.0, 23.0, 0.0, 23.0])
    pitch: float = 1.0
    displacement: float = 0.05
    min_dist: float = 1.0
    scale: float = 1.0


@dataclass
class ChernConfig:
    fractions: list = field(default_factory=lambda: [0.3, 0.4, 0.5])
    compare_oracle: bool = True
    tolerance: float = 0.05


@dataclass
class FrameConfig:
    n_probes: int = 100
    interior_margin: float = 5.0


@dataclass
class DichotomyConfig:
    sizes: list = field(default_factory=lambda: [12, 24])
    interior_margin: float = 5.0


@dataclass
class DeformConfig:
    mode: str = "lattice"  # lattice | field
    n_samples: int = 11
    displacement: float = 0.05
    rel_span: float = 0.03


@dataclass
class ResolventConfig:
    pitch: float = 0.25
    theta: float = 0.2
    z_real: float = 0.5
    z_imag: float = 0.5
    n_samples: int = 6
    amplitude: float = -5.0
    radius: float = 0.6


@dataclass
class ExperimentConfig:
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    chern: ChernConfig = field(default_factory=ChernConfig)
    frame: FrameConfig = field(default_factory=FrameConfig)
    dichotomy: DichotomyConfig = field(default_factory=DichotomyConfig)
    deform: DeformConfig = field(default_factory=DeformConfig)
    resolvent: ResolventConfig = field(default_factory=ResolventConfig)


_SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig)
             if f.name != "seed"}


def _coerce(path: str, value, expect_type):
    if expect_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expect_type is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}", key=path)
        return list(value)
    if not isinstance(value, expect_type) or (expect_type is int and isinstance(value, bool)):
        raise ConfigError(
            f"{path}: expected {expect_type.__name__}, got {type(value).__name__}",
            key=path, value=value)
    return value


def _fill_section(obj, data: dict, prefix: str):
    known = {f.name: f for f in fields(obj)}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(f"unknown config key {path!r}", key=path)
        expect = type(getattr(obj, key))
        setattr(obj, key, _coerce(path, value, expect))
    return obj


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, value in data.items():
        if key == "seed":
            cfg.seed = _coerce("seed", value, int)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section [{key}] must be a table", key=key)
            _fill_section(getattr(cfg, key), value, key)
        else:
            raise ConfigError(f"unknown config key {key!r}", key=key)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}", path=str(path)) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    return config_from_dict(data)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply dotted key=value strings, e.g. model.L=12 or seed=3."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", override=item)
        key, _, raw = item.partition("=")
        key = key.strip()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw.strip()
        parts = key.split(".")
        if len(parts) == 1 and parts[0] == "seed":
            cfg.seed = _coerce("seed", value, int)
            continue
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        section = getattr(cfg, parts[0])
        _fill_section(section, {parts[1]: value}, parts[0])
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {type(v).__name__} to TOML", value=repr(v))


def dumps_toml(cfg: ExperimentConfig) -> str:
    """Serialize the config; round-trips through load for the schema subset
    (tables of scalars and flat lists)."""
    data = config_to_dict(cfg)
    lines = [f"seed = {_toml_value(data.pop('seed'))}", ""]
    for section, table in data.items():
        lines.append(f"[{section}]")
        for key, value in table.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
