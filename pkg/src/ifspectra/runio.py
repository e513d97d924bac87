"""Run configuration loading, hashing, and CSV/JSON output helpers."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


def get_key(cfg: dict, dotted: str, kind=None, default=..., choices=None):
    """Fetch cfg['a']['b'] for dotted='a.b' with typed validation.

    Raises ConfigError naming the full key path on any failure; a default of
    ... (the sentinel) marks the key as required.
    """
    node = cfg
    parts = dotted.split(".")
    for i, part in enumerate(parts):
        if not isinstance(node, dict):
            raise ConfigError(f"{'.'.join(parts[:i])}: expected a mapping")
        if part not in node:
            if default is ...:
                raise ConfigError(f"{dotted}: required key missing")
            return default
        node = node[part]
    if kind is bool:
        if not isinstance(node, bool):
            raise ConfigError(f"{dotted}: expected true/false, got {node!r}")
    elif kind is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(f"{dotted}: expected an integer, got {node!r}")
    elif kind is float:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise ConfigError(f"{dotted}: expected a number, got {node!r}")
        node = float(node)
    elif kind is str:
        if not isinstance(node, str):
            raise ConfigError(f"{dotted}: expected a string, got {node!r}")
    elif kind is list:
        if not isinstance(node, list):
            raise ConfigError(f"{dotted}: expected a list, got {node!r}")
    elif kind is dict:
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: expected a mapping, got {node!r}")
    if choices is not None and node not in choices:
        raise ConfigError(f"{dotted}: {node!r} not one of {sorted(choices)}")
    return node


def config_hash(cfg: dict) -> str:
    """Stable 12-hex digest of a config mapping."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_csv(path, header, rows, meta: dict | None = None) -> None:
    """CSV with leading '# key=value' comment lines for provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}={meta[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_manifest(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
