"""Run configuration files.

A YAML config groups settings into sections, each mapped onto the matching
dataclass or spec. Unknown sections and unknown keys inside a section are
hard errors, so typos fail fast instead of silently using defaults.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import ConfigError
from .synthgen.dataset import (
    GenerationSpec,
    SplitSpec,
    desk_generation_spec,
    paper_generation_spec,
)

SECTIONS = ("generation", "model", "train", "rca")

RCA_DEFAULTS = {"risk": 1e-4, "q_init": 0.98, "signed": False}

PRESETS = {"desk": desk_generation_spec, "paper": paper_generation_spec}


def load_run_config(path: str | Path | None) -> dict:
    """Parse and validate a config file; None yields all-default sections."""
    if path is None:
        return {name: {} for name in SECTIONS}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise ConfigError(f"config root must be a mapping, got {type(payload).__name__}")
    unknown = sorted(set(payload) - set(SECTIONS))
    if unknown:
        raise ConfigError(
            f"unknown config sections: {', '.join(unknown)} (known: {', '.join(SECTIONS)})"
        )
    out = {}
    for name in SECTIONS:
        section = payload.get(name, {})
        if section is None:
            section = {}
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be a mapping")
        out[name] = section
    return out


def build_generation_spec(section: dict, preset: str = "desk", seed: int = 0) -> GenerationSpec:
    """Preset generation settings overlaid with config overrides."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (known: {', '.join(PRESETS)})")
    base = PRESETS[preset](seed=seed).to_dict()
    splits_override = section.get("splits")
    overrides = {k: v for k, v in section.items() if k != "splits"}
    unknown = sorted(set(overrides) - set(base))
    if unknown:
        raise ConfigError(f"unknown generation keys: {', '.join(unknown)}")
    base.update(overrides)
    base["seed"] = seed
    if splits_override is not None:
        if not isinstance(splits_override, dict):
            raise ConfigError("generation.splits must be a mapping")
        splits = {}
        for name, fields in splits_override.items():
            try:
                splits[name] = SplitSpec(**fields)
            except TypeError as exc:
                raise ConfigError(f"bad split spec for {name!r}: {exc}") from exc
        base["splits"] = {name: s.to_dict() for name, s in splits.items()}
    return GenerationSpec.from_dict(base)


def rca_settings(section: dict) -> dict:
    """RCA defaults overlaid with config overrides."""
    unknown = sorted(set(section) - set(RCA_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown rca keys: {', '.join(unknown)}")
    merged = RCA_DEFAULTS | section
    if not 0.0 < merged["risk"] < 1.0:
        raise ConfigError(f"rca.risk must be in (0, 1), got {merged['risk']}")
    if not 0.0 < merged["q_init"] < 1.0:
        raise ConfigError(f"rca.q_init must be in (0, 1), got {merged['q_init']}")
    return merged
