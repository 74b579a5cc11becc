import json
import logging
import os
from typing import Any, Dict, Optional

from pydantic import ValidationError

from tcfinger.config.run_config import RunConfig
from tcfinger.errors import ConfigError, IoError


def load_config(file_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read a run configuration JSON and apply command-line overrides on top.

    Overrides whose value is None are ignored, so unset flags keep the file's value.
    """
    data: Dict[str, Any] = {}
    if file_path:
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"File {file_path} not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"File {file_path} contains invalid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"File {file_path} must contain a JSON object")

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def dump_config(config: RunConfig, out_dir: str) -> str:
    """Write the resolved configuration as config.json next to the run's outputs."""
    path = os.path.join(out_dir, "config.json")
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(config.model_dump_json(indent=2))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    logging.debug(f"Resolved configuration written to {path}")
    return path
