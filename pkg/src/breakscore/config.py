"""Run configuration: sectioned YAML with strict key checking.

Sections map onto the module configs (synth, corruption, encoder, bilstm,
train, eval) plus a global seed. Unknown sections or keys are rejected;
command-line flags override file values; every command echoes the resolved
configuration next to its outputs.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .corruption import CorruptionConfig
from .exceptions import DataError
from .nn import BiLstmConfig, EncoderConfig
from .synth import SynthConfig
from .tasks import TrainConfig

# vocab_size is resolved from data at run time, never configured.
_SECTION_TYPES = {
    "synth": (SynthConfig, ()),
    "corruption": (CorruptionConfig, ()),
    "encoder": (EncoderConfig, ("vocab_size",)),
    "bilstm": (BiLstmConfig, ("vocab_size",)),
    "train": (TrainConfig, ()),
}

_EVAL_KEYS = {"k"}


@dataclass
class RunConfig:
    seed: int = 0
    synth: dict = field(default_factory=dict)
    corruption: dict = field(default_factory=dict)
    encoder: dict = field(default_factory=dict)
    bilstm: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)

    def build(self, section: str, **runtime):
        """Instantiate the section's config dataclass, seeded from the global seed."""
        cls, _ = _SECTION_TYPES[section]
        kwargs = dict(getattr(self, section))
        kwargs.update(runtime)
        fields = {f.name for f in dataclasses.fields(cls)}
        if "seed" in fields and "seed" not in kwargs:
            kwargs["seed"] = self.seed
        # YAML has no tuples; coerce list-valued fields.
        for f in dataclasses.fields(cls):
            if f.name in kwargs and isinstance(kwargs[f.name], list) and f.type.startswith("tuple"):
                kwargs[f.name] = tuple(kwargs[f.name])
        return cls(**kwargs)

    def resolved(self) -> dict:
        return {
            "seed": self.seed,
            "synth": dict(self.synth),
            "corruption": dict(self.corruption),
            "encoder": dict(self.encoder),
            "bilstm": dict(self.bilstm),
            "train": dict(self.train),
            "eval": dict(self.eval),
        }


def _check_keys(section: str, given: dict, cls, excluded: tuple) -> None:
    allowed = {f.name for f in dataclasses.fields(cls)} - set(excluded)
    unknown = set(given) - allowed
    if unknown:
        raise DataError(
            f"unknown key(s) in [{section}]: {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise DataError(f"{path}: config must be a mapping of sections")
    cfg = RunConfig()
    for section, value in raw.items():
        if section == "seed":
            cfg.seed = int(value)
            continue
        if section == "eval":
            unknown = set(value) - _EVAL_KEYS
            if unknown:
                raise DataError(f"unknown key(s) in [eval]: {sorted(unknown)}")
            cfg.eval = dict(value)
            continue
        if section not in _SECTION_TYPES:
            raise DataError(f"unknown config section [{section}]")
        if not isinstance(value, dict):
            raise DataError(f"section [{section}] must be a mapping")
        cls, excluded = _SECTION_TYPES[section]
        _check_keys(section, value, cls, excluded)
        setattr(cfg, section, dict(value))
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.resolved(), sort_keys=True, default_flow_style=False)
