"""TOML / JSON config files, auto-detected."""

from __future__ import annotations

import json
import sys
from pathlib import Path

from .errors import AssetError, ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


def load_config_file(path: str | Path) -> dict:
    """Parse ``path`` as JSON (``.json``) or TOML (``.toml``); other suffixes try JSON first."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise AssetError(f"cannot read config {path}: {exc}") from exc
    suffix = path.suffix.lower()
    parsers = {".json": [_json], ".toml": [_toml]}.get(suffix, [_json, _toml])
    errors = []
    for parse in parsers:
        try:
            data = parse(text)
        except ValueError as exc:
            errors.append(str(exc))
            continue
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a table/object")
        return data
    raise ConfigError(f"{path}: not valid JSON or TOML ({'; '.join(errors)})")


def _json(text: str) -> dict:
    return json.loads(text)


def _toml(text: str) -> dict:
    return tomllib.loads(text)
