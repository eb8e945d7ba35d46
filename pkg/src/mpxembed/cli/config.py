"""Run configuration: JSON file merged over defaults, CLI flags on top.

Unknown keys are rejected; the effective merged config is echoed into
every run directory so any output can be reproduced from it.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..model.vit import EncoderConfig
from ..pretrain.config import desk_pretrain_config


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    return {
        "seed": 0,
        "workers": 1,
        "encoder": EncoderConfig().to_dict(),
        "pretrain": desk_pretrain_config().to_dict(),
        "synth": {
            "n_images": 64,
            "image_size": 64,
            "cells_per_image": 10,
            "noise_sigma": 0.08,
            "with_gains": True,
            "n_subsets": 2,
        },
        "probe": {
            "c_points": 25,
            "max_iter": 200,
            "n_folds": 4,
            "crop_size": 64,
            "readout": "marker",
        },
        "patch": {
            "size": 64,
            "stride": 64,
        },
    }


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here!r} must be a table")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- explicit overrides, with key validation."""
    cfg = default_config()
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            user = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def echo_config(cfg: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.json").write_text(
        json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")
