"""Flat key-value config files for the batch commands.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored. Values stay strings until a typed getter pulls them out, so error
messages can name the offending key. Matrices are rows split by ';' with
entries split by ',' (a single row of d*d entries is accepted for a d x d
matrix).
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "ConfigError",
    "parse_config_text",
    "load_config",
    "get_str",
    "get_float",
    "get_int",
    "get_bool",
    "get_floats",
    "get_matrix",
    "get_mask",
    "check_keys",
]


class ConfigError(ValueError):
    """Malformed config file or value; message always names the key/line."""


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text)


def get_str(cfg: dict, key: str, default=None, choices=None) -> str | None:
    val = cfg.get(key, default)
    if val is not None and choices is not None and val not in choices:
        raise ConfigError(f"key {key!r}: expected one of {sorted(choices)}, got {val!r}")
    return val


def get_float(cfg: dict, key: str, default=None) -> float | None:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as e:
        raise ConfigError(f"key {key!r}: not a number: {cfg[key]!r}") from e


def get_int(cfg: dict, key: str, default=None) -> int | None:
    if key not in cfg:
        return default
    try:
        return int(cfg[key], 0)
    except ValueError as e:
        raise ConfigError(f"key {key!r}: not an integer: {cfg[key]!r}") from e


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def get_bool(cfg: dict, key: str, default=None) -> bool | None:
    if key not in cfg:
        return default
    val = cfg[key].lower()
    if val in _TRUE:
        return True
    if val in _FALSE:
        return False
    raise ConfigError(f"key {key!r}: not a boolean: {cfg[key]!r}")


def get_floats(cfg: dict, key: str, default=None) -> np.ndarray | None:
    if key not in cfg:
        return default
    parts = [p for p in cfg[key].replace(";", ",").split(",") if p.strip()]
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as e:
        raise ConfigError(f"key {key!r}: not a number list: {cfg[key]!r}") from e


def get_matrix(cfg: dict, key: str, d: int, default=None) -> np.ndarray | None:
    """d x d matrix: ';'-separated rows, or one flat row-major list."""
    if key not in cfg:
        return default
    rows = [r for r in cfg[key].split(";") if r.strip()]
    try:
        parsed = [[float(p) for p in r.split(",") if p.strip()] for r in rows]
    except ValueError as e:
        raise ConfigError(f"key {key!r}: not a number matrix: {cfg[key]!r}") from e
    if len(parsed) == 1 and len(parsed[0]) == d * d:
        return np.array(parsed[0], dtype=np.float64).reshape(d, d)
    if len(parsed) == d and all(len(r) == d for r in parsed):
        return np.array(parsed, dtype=np.float64)
    raise ConfigError(
        f"key {key!r}: expected {d}x{d} entries (rows split by ';'), got {cfg[key]!r}"
    )


def get_mask(cfg: dict, key: str, d: int, default=None) -> np.ndarray | None:
    """0/1 character rows, ';'-separated: mask = 110;011;111."""
    if key not in cfg:
        return default
    rows = [r.strip() for r in cfg[key].split(";") if r.strip()]
    if len(rows) != d or any(len(r) != d for r in rows) or any(
        ch not in "01" for r in rows for ch in r
    ):
        raise ConfigError(f"key {key!r}: expected {d} rows of {d} 0/1 chars")
    return np.array([[ch == "1" for ch in r] for r in rows], dtype=bool)


def check_keys(cfg: dict, allowed: set[str]) -> None:
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
