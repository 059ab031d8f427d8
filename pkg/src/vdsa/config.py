"""Flat ``key = value`` config documents.

Values are decoded as JSON when possible (numbers, lists, booleans) and kept
as strings otherwise. ``#`` and ``;`` start comment lines.
"""
from __future__ import annotations

import configparser
import json
from pathlib import Path

from .errors import ConfigError

_SECTION = "config"


def _decode(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        low = raw.lower()
        if low in ("true", "false"):
            return low == "true"
        return raw


def parse_flat(text: str, source: str = "<string>") -> dict:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n{text}", source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return {k: _decode(v) for k, v in parser.items(_SECTION)}


def read_flat(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_flat(text, str(path))


def dump_flat(values: dict) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in values.items())
