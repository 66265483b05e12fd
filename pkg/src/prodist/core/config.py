"""
Configuration for prodist.

Settings are read from .prodist/prodist.json (JSON5 accepted) in the current
directory or the nearest parent that has one, and can be overridden per field
through PRODIST_* environment variables (nested fields use a double
underscore, e.g. PRODIST_ENGINES__TYPE_CLASS_LIMIT=100000).
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Tuple

import json5
from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from prodist.core.numeric import (
    DEFAULT_EQUALITY_TOLERANCE,
    DEFAULT_SUM_TOLERANCE,
    DEFAULT_UPWARD_ULPS,
    NumericField,
)

logger = logging.getLogger("prodist.config")

# ==============================================================================
# Root Discovery
# ==============================================================================

def find_prodist_root() -> Path:
    """
    Locates the .prodist directory by searching the current directory and its parents.
    Defaults to CWD/.prodist if not found elsewhere.
    """
    cwd = Path.cwd()
    root = cwd / ".prodist"
    if root.exists():
        return root

    for parent in cwd.parents:
        candidate = parent / ".prodist"
        if candidate.exists():
            return candidate

    return cwd / ".prodist"


PRODIST_CONFIG_FILE = "prodist.json"


# ==============================================================================
# Pydantic Models
# ==============================================================================

class EnginesConfig(BaseModel):
    """Guards for the exact engines."""
    brute_force_limit: int = Field(default=10**7, ge=1)
    type_class_limit: int = Field(default=10**7, ge=1)
    partitions: int = Field(default=1, ge=1)


class NumericsConfig(BaseModel):
    """Numeric backend and tolerances."""
    backend: NumericField = NumericField.RATIONAL
    sum_tolerance: float = Field(default=DEFAULT_SUM_TOLERANCE, ge=0.0)
    equality_tolerance: float = Field(default=DEFAULT_EQUALITY_TOLERANCE, ge=0.0)
    upward_ulps: int = Field(default=DEFAULT_UPWARD_ULPS, ge=0)


class SamplingConfig(BaseModel):
    """Monte Carlo defaults."""
    samples: int = Field(default=100_000, ge=100)
    seed: int = 0
    shards: int = Field(default=1, ge=1)
    confidence: float = Field(default=0.95, gt=0.0, lt=1.0)


class ExperimentsConfig(BaseModel):
    """Probe grids and the small-distance regime filter."""
    regime: float = 0.1
    probe_delta: float = 1e-3
    pbars: Tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49)
    deltas: Tuple[float, ...] = (1e-3, 1e-2, 0.02)
    grid: int = Field(default=64, ge=1)
    assembly_limit: int = Field(default=10**5, ge=1)


class LoggingConfig(BaseModel):
    """Configuration for the JSONL run log."""
    enabled: bool = True
    max_size_mb: int = 10
    backup_count: int = 5
    log_dir: str = ".prodist/logs"


class ProdistConfig(BaseSettings):
    """Root configuration object for prodist."""
    debug: bool = False
    engines: EnginesConfig = Field(default_factory=EnginesConfig)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    experiments: ExperimentsConfig = Field(default_factory=ExperimentsConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    model_config = SettingsConfigDict(
        env_prefix="PRODIST_",
        env_nested_delimiter="__",
        populate_by_name=True,
    )


# ==============================================================================
# Configuration Loader
# ==============================================================================

class ConfigLoader:
    """Responsible for locating, validating, and loading the configuration."""

    DEFAULT_CONFIG_DIR: Optional[Path] = None
    CONFIG_FILENAME = PRODIST_CONFIG_FILE

    @classmethod
    def get_config_path(cls) -> Path:
        root = cls.DEFAULT_CONFIG_DIR or find_prodist_root()
        return root / cls.CONFIG_FILENAME

    @classmethod
    def load(cls) -> ProdistConfig:
        """Loads .prodist/prodist.json, falling back to defaults (never writes)."""
        config_path = cls.get_config_path()
        if not config_path.exists():
            logger.debug(f"No config found at {config_path}. Using defaults.")
            return ProdistConfig()

        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json5.load(f)
            return ProdistConfig(**data)
        except Exception as e:
            logger.error(f"Failed to load configuration from {config_path}: {e}")
            raise ValueError(f"Invalid configuration file: {e}")

    @classmethod
    def save(cls, config: ProdistConfig) -> Path:
        """Saves configuration to disk, creating the directory if needed."""
        config_path = cls.get_config_path()
        try:
            config_path.parent.mkdir(parents=True, exist_ok=True)
            data = config.model_dump(mode="json")
            config_path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        except Exception as e:
            logger.error(f"Failed to save configuration to {config_path}: {e}")
            raise
        return config_path


# ==============================================================================
# Dotted-key access (used by `prodist config get/set/unset`)
# ==============================================================================

def get_value(config: ProdistConfig, key: str) -> Any:
    """Look up a dotted key such as 'engines.type_class_limit'."""
    value: Any = config.model_dump(mode="json")
    for part in key.split("."):
        if not isinstance(value, dict) or part not in value:
            raise KeyError(key)
        value = value[part]
    return value


def set_value(config: ProdistConfig, key: str, raw: str) -> ProdistConfig:
    """Return a validated copy with ``key`` set; ``raw`` is parsed as JSON5 when possible."""
    try:
        parsed: Any = json5.loads(raw)
    except ValueError:
        parsed = raw
    data = config.model_dump(mode="json")
    node = data
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise KeyError(key)
        node = node[part]
    if parts[-1] not in node:
        raise KeyError(key)
    node[parts[-1]] = parsed
    return ProdistConfig(**data)


def unset_value(config: ProdistConfig, key: str) -> ProdistConfig:
    """Return a copy with ``key`` restored to its default."""
    default = get_value(ProdistConfig.model_construct(), key)
    return set_value(config, key, json.dumps(default))


# ==============================================================================
# Facade / Singleton Access
# ==============================================================================

_params: Optional[ProdistConfig] = None


def load_config(reload: bool = False) -> ProdistConfig:
    """Global configuration accessor."""
    global _params
    if _params is None or reload:
        _params = ConfigLoader.load()
    return _params
