"""Run configuration: defaults, JSON config files and flag overrides.

Precedence is defaults < config file < command-line flags. The only
environment input is ``TRAJSAMPLER_CONFIG``, which names the config file
used when ``--config`` is not given.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Optional

from . import synth
from .errors import ConfigError
from .harness import DEFAULT_KS, SAMPLERS, SamplerSpec, default_samplers
from .optimizer import LossKind, OptimizerConfig

CONFIG_ENV = "TRAJSAMPLER_CONFIG"

_OPT_FIELDS = {f.name for f in fields(OptimizerConfig)}


@dataclass(frozen=True)
class RunConfig:
    S: int = 10
    # None: the standard ks (1, 5, 10) that fit within S, or just S
    ks: Optional[tuple[int, ...]] = None
    loss: str = "minade"
    loss_k: Optional[int] = None
    optimizer: Mapping[str, Any] = field(default_factory=dict)
    samplers: tuple[Any, ...] = ()
    sampler: str = "ours"
    master_seed: int = synth.DEFAULT_MASTER_SEED
    count: int = synth.DEFAULT_SCENARIOS
    proposals_per_model: int = 10
    counts: tuple[int, ...] = (30, 60, 90)
    thresholds: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    input: Optional[str] = None
    output: Optional[str] = None
    timings: Optional[str] = None
    workers: int = 1
    executor: str = "process"

    def validate(self) -> "RunConfig":
        if self.S < 1:
            raise ConfigError("S", "must be >= 1")
        if self.ks is None:
            ks = tuple(k for k in DEFAULT_KS if k <= self.S) or (self.S,)
            return replace(self, ks=ks).validate()
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("ks", "must be a non-empty list of positive integers")
        if max(self.ks) > self.S:
            raise ConfigError("ks", f"max(ks)={max(self.ks)} exceeds S={self.S}")
        try:
            LossKind(self.loss)
        except ValueError:
            raise ConfigError("loss", f"unknown loss {self.loss!r}") from None
        if self.loss_k is not None and not 1 <= self.loss_k <= self.S:
            raise ConfigError("loss_k", f"must lie in [1, S={self.S}]")
        unknown = sorted(set(self.optimizer) - (_OPT_FIELDS - {"seed"}))
        if unknown:
            raise ConfigError(f"optimizer.{unknown[0]}", "unknown optimizer field")
        try:
            OptimizerConfig(**self.optimizer)
        except (TypeError, ValueError) as exc:
            raise ConfigError("optimizer", str(exc)) from None
        if self.sampler not in SAMPLERS:
            raise ConfigError("sampler", f"unknown sampler {self.sampler!r}; expected one of {', '.join(SAMPLERS)}")
        self.sampler_specs()
        if self.count < 1:
            raise ConfigError("count", "must be >= 1")
        if self.proposals_per_model < 1:
            raise ConfigError("proposals_per_model", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.executor not in ("process", "thread"):
            raise ConfigError("executor", "must be 'process' or 'thread'")
        if any(t <= 0 for t in self.thresholds):
            raise ConfigError("thresholds", "must be > 0")
        return self

    def _ours_params(self, params: Mapping[str, Any]) -> dict:
        merged = dict(self.optimizer)
        merged["loss"] = self.loss
        if self.loss_k is not None:
            merged["loss_k"] = self.loss_k
        merged.update(params)
        return merged

    def spec_for(self, entry, where: str = "sampler") -> SamplerSpec:
        """Resolve a sampler entry (a name or a {name, params, label} object).

        A bare name picks up the benchmark defaults for that sampler.
        """
        defaults = {s.name: s for s in default_samplers()}
        if isinstance(entry, str):
            name, params, label = entry, None, None
        elif isinstance(entry, Mapping):
            extra = sorted(set(entry) - {"name", "params", "label"})
            if extra:
                raise ConfigError(f"{where}.{extra[0]}", "unknown key")
            name, params, label = entry.get("name"), entry.get("params"), entry.get("label")
            if params is not None and not isinstance(params, Mapping):
                raise ConfigError(f"{where}.params", "must be an object")
        else:
            raise ConfigError(where, "must be a sampler name or an object")
        if name not in SAMPLERS:
            raise ConfigError(f"{where}.name" if isinstance(entry, Mapping) else where,
                              f"unknown sampler {name!r}; expected one of {', '.join(SAMPLERS)}")
        if params is None:
            params = dict(defaults[name].params) if name in defaults else {}
        if name == "ours":
            params = self._ours_params(params)
        try:
            return SamplerSpec(name, params, label)
        except ConfigError as exc:
            raise ConfigError(f"{where}.params", str(exc)) from None

    def sampler_specs(self) -> list[SamplerSpec]:
        entries = self.samplers or tuple(s.name for s in default_samplers())
        specs = [self.spec_for(e, f"samplers[{i}]") for i, e in enumerate(entries)]
        labels = [s.display for s in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError("samplers", "sampler labels must be unique")
        return specs


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    try:
        if name in ("S", "count", "proposals_per_model", "workers", "master_seed"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if name == "loss_k":
            if value is None:
                return None
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if name == "ks" and value is None:
            return None
        if name in ("ks", "counts"):
            if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
                raise TypeError
            return tuple(value)
        if name == "thresholds":
            if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                                  for v in value):
                raise TypeError
            return tuple(float(v) for v in value)
        if name == "samplers":
            if not isinstance(value, list):
                raise TypeError
            return tuple(value)
        if name == "optimizer":
            if not isinstance(value, dict):
                raise TypeError
            return dict(value)
        if name in ("input", "output", "timings"):
            if value is not None and not isinstance(value, str):
                raise TypeError
            return value
        if not isinstance(value, str):
            raise TypeError
        return value
    except TypeError:
        raise ConfigError(name, f"wrong type {type(value).__name__} (expected {kind})") from None


def from_mapping(data: Mapping[str, Any], base: Optional[RunConfig] = None) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config", "top level must be a JSON object")
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(unknown[0], "unknown config field")
    updates = {k: _coerce(k, v) for k, v in data.items()}
    return replace(base or RunConfig(), **updates)


def load_config_file(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return from_mapping(data)


def resolve(config_path: Optional[str], overrides: Mapping[str, Any]) -> RunConfig:
    """Defaults, then the config file, then explicit overrides; validated."""
    path = config_path or os.environ.get(CONFIG_ENV) or None
    cfg = load_config_file(path) if path else RunConfig()
    updates = {k: v for k, v in overrides.items() if v is not None}
    if "optimizer" in updates:
        updates["optimizer"] = {**cfg.optimizer, **updates["optimizer"]}
        if not updates["optimizer"]:
            del updates["optimizer"]
    return replace(cfg, **updates).validate()
