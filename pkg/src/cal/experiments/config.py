"""Experiment configuration: packaged YAML defaults merged with user overrides."""
from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

__all__ = ["EXPERIMENTS", "default_config", "deep_merge", "load_config"]

EXPERIMENTS = ("reconstruction", "lissajous", "popeq", "persistence", "shapes", "association", "forgetting")


def default_config(name: str) -> dict[str, Any]:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    text = resources.files("cal.configs").joinpath(f"{name}.yaml").read_text()
    return yaml.safe_load(text)


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; lists and scalars in ``override`` replace those in ``base``."""
    out = copy.deepcopy(dict(base))
    for key, val in override.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(name: str, path: str | Path | None = None, seed: int | None = None,
                overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Defaults for ``name``, then the YAML file at ``path``, then ``overrides``, then ``seed``."""
    cfg = default_config(name)
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, Mapping):
            raise ValueError(f"{path}: expected a mapping at top level")
        cfg = deep_merge(cfg, user)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg
