# src/config_files.py
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Union

from pydantic import ValidationError

from src.errors import ConfigurationError
from src.logger_config import logger
from src.models import ExperimentConfig

SUPPORTED_SUFFIXES = (".toml", ".json")


def parse_experiment_config(raw: Any) -> ExperimentConfig:
    """Validate a decoded experiment document"""
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        logger.error(f"Rejected experiment configuration: {e.error_count()} errors")
        raise ConfigurationError("invalid experiment configuration", errors=e.errors())


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment file (TOML or JSON)"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_SUFFIXES:
        raise ConfigurationError(
            f"unsupported config file type '{suffix}', expected one of {', '.join(SUPPORTED_SUFFIXES)}"
        )
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}")

    try:
        raw = tomllib.loads(text) if suffix == ".toml" else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot parse {path}: {e}")
    config = parse_experiment_config(raw)

    # a relative table path is resolved against the config file
    table_path = config.scenario.demand.table_path
    if table_path and not Path(table_path).is_absolute():
        config.scenario.demand.table_path = str(path.parent / table_path)
    logger.info(f"Loaded experiment '{config.name}' from {path}")
    return config


def dump_experiment_config(config: ExperimentConfig) -> str:
    return config.model_dump_json(indent=2)
