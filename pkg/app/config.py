"""
Configuration.
- Environment defaults via pydantic-settings (.env supported)
- Flat key=value command files via python-dotenv, unknown keys rejected
- One top-level seed, split per stage
"""
import hashlib
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions import ConfigError

logger = logging.getLogger(__name__)

ConfigType = TypeVar("ConfigType", bound=BaseModel)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Application
    APP_NAME: str = "Noisy-Text MT Robustness Toolkit"
    APP_VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"

    # Reproducibility
    SEED: int = 13
    NUM_THREADS: int = 1
    DETERMINISTIC: bool = True

    # Artifacts
    CHECKPOINT_DIR: str = "checkpoints"

    # Pipeline defaults
    MAX_LENGTH: int = 256
    BPE_MERGES: int = 8000
    BEAM_SIZE: int = 4
    LENGTH_REWARD: float = 0.0


settings = Settings()


def derive_seed(root_seed: int, stage: str) -> int:
    """Split the top-level seed into an independent, stable seed per stage."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**31 - 1)


def read_flat_file(path: Path) -> Dict[str, Optional[str]]:
    """Read a flat key=value file. Blank values are dropped so defaults apply."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}", key="config")
    values = dotenv_values(path)
    return {key.strip(): value for key, value in values.items() if value not in (None, "")}


def build_config(model: Type[ConfigType], values: Dict[str, Any]) -> ConfigType:
    """
    Validate values against a command config model.
    Raises ConfigError naming the first offending key.
    """
    try:
        return model(**values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first.get("loc", ())) or "config"
        if first.get("type") == "extra_forbidden":
            message = f"Unknown config key '{key}'"
        else:
            message = f"Invalid value for '{key}': {first.get('msg')}"
        logger.error(message)
        raise ConfigError(message, key=key) from e


def load_config(model: Type[ConfigType], path: Optional[Path] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ConfigType:
    """File values first, then explicit overrides (command-line flags)."""
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_flat_file(path))
        logger.info(f"Loaded {len(values)} config keys from {path}")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(model, values)
