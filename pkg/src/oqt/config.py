"""Run configuration: a versioned JSON document with strict key checking.

Example::

    {
      "version": 1,
      "mode": "infer",
      "protocol": "ramsey",
      "seed": 1234,
      "particles": 4000,
      "output_dir": "out/ramsey",
      "prior": {"rx_variance": 0.001, "omega_range": [0.0, 1.0]},
      "design": {"n_train": [2, 49], "n_test": [50, 100], "shots": 500},
      "truth": {"kind": "reference"}
    }

``prior`` and ``design`` hold either keyword parameters for the protocol's
built-in generator or a full serialized object (a prior spec with ``gates``,
a design with ``training``).  Integer ranges are inclusive ``[low, high]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

CONFIG_VERSION = 1
MODES = ("simulate", "infer", "rb", "dynamics", "statetomo")
INFERENCE_MODES = ("infer", "rb", "statetomo")
PROTOCOLS = ("ramsey", "lsgst", "rb", "statetomo", "dynamics")
_MODE_PROTOCOL = {"rb": "rb", "statetomo": "statetomo", "dynamics": "dynamics"}
TRUTH_KINDS = ("reference", "prior-sample", "ideal", "gateset")

SECTION_KEYS = {
    "inference": {"resample_threshold", "liu_west_a"},
    "rb": {"test_lengths", "per_length", "level", "length_range"},
    "statetomo": {"states"},
    "dynamics": {"rates", "conjugate", "t_max", "points", "delta", "eps", "depth"},
    "truth": {"kind", "params", "gateset"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    seed: int
    mode: str = "infer"
    protocol: str = ""
    particles: int = 2000
    output_dir: str = "out"
    prior: Mapping = field(default_factory=dict)
    design: Mapping = field(default_factory=dict)
    truth: Mapping = field(default_factory=dict)
    dataset: str = ""
    inference: Mapping = field(default_factory=dict)
    rb: Mapping = field(default_factory=dict)
    statetomo: Mapping = field(default_factory=dict)
    dynamics: Mapping = field(default_factory=dict)
    version: int = CONFIG_VERSION

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


def _plain(value):
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    return value


def validate(cfg: RunConfig) -> None:
    if cfg.version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {cfg.version!r}")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError(f"seed: must be a nonnegative integer, got {cfg.seed!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {cfg.mode!r}")
    protocol = cfg.protocol or _MODE_PROTOCOL.get(cfg.mode, "")
    if not protocol:
        raise ConfigError(f"protocol: required in {cfg.mode} mode")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol: expected one of {PROTOCOLS}, got {protocol!r}")
    expected = _MODE_PROTOCOL.get(cfg.mode)
    if expected and protocol != expected:
        raise ConfigError(f"protocol: {cfg.mode} mode runs the {expected!r} protocol, got {protocol!r}")
    if cfg.mode in ("simulate", "infer") and protocol not in ("ramsey", "lsgst", "rb", "statetomo"):
        raise ConfigError(f"protocol: {protocol!r} cannot be used in {cfg.mode} mode")
    object.__setattr__(cfg, "protocol", protocol)
    if isinstance(cfg.particles, bool) or not isinstance(cfg.particles, int):
        raise ConfigError(f"particles: must be an integer, got {cfg.particles!r}")
    if cfg.mode in INFERENCE_MODES and cfg.particles < 2:
        raise ConfigError(f"particles: {cfg.mode} mode needs at least 2 particles, got {cfg.particles}")
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        raise ConfigError("output_dir: must be a nonempty path")
    for name in ("prior", "design", "truth", "inference", "rb", "statetomo", "dynamics"):
        value = getattr(cfg, name)
        if not isinstance(value, Mapping):
            raise ConfigError(f"{name}: must be an object")
        allowed = SECTION_KEYS.get(name)
        if allowed is not None:
            unknown = set(value) - allowed
            if unknown:
                raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        object.__setattr__(cfg, name, dict(value))
    kind = cfg.truth.get("kind")
    if kind is not None and kind not in TRUTH_KINDS:
        raise ConfigError(f"truth.kind: expected one of {TRUTH_KINDS}, got {kind!r}")
    if kind == "gateset" and "gateset" not in cfg.truth:
        raise ConfigError("truth.gateset: required when truth.kind is 'gateset'")
    for key in ("resample_threshold", "liu_west_a"):
        if key in cfg.inference and not 0.0 <= float(cfg.inference[key]) <= 1.0:
            raise ConfigError(f"inference.{key}: must lie in [0, 1]")
    if not isinstance(cfg.dataset, str):
        raise ConfigError("dataset: must be a path string")


def config_from_dict(d: Mapping) -> RunConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "seed" not in d:
        raise ConfigError("seed: required")
    if "version" not in d:
        raise ConfigError("version: required")
    return RunConfig(**d)


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(doc)
