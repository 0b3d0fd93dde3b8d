"""
Process settings, read from environment variables and an environment-specific dotenv file.

    APP__LOG_LEVEL=DEBUG
    RUNTIME__FOLD_WORKERS=5
    RUNTIME__FOLD_TIMEOUT_SECONDS=1800
    RUNTIME__GRADCHECK_EPS=1e-6

Hyper-parameters of a run are not settings; they live in the run config file
(see `kinforest.run_config`).
"""

from pathlib import Path
from typing import Dict

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from kinforest.environment import Environment
from kinforest.logs import LogLevel


ROOT_PATH = Path(__file__).parent.parent.parent


class AppSettings(BaseSettings):
    log_level : LogLevel = Field(default=LogLevel.INFO, description="Logging level")
    root_path : Path     = Field(default=ROOT_PATH, description="Root path of the project")


class RuntimeSettings(BaseSettings):
    """How runs are executed; never changes their results."""

    fold_workers          : int   = Field(default=1, ge=1, description="Folds trained concurrently")
    fold_timeout_seconds  : float = Field(default=3600, gt=0, description="Wall-clock limit per fold")
    gradcheck_eps         : float = Field(default=1e-5, gt=0, description="Central-difference step of the gradient suite")


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=(ROOT_PATH / Environment.current().dotenv_filename()),
        env_file_encoding='utf-8',
        env_nested_delimiter='__',
        extra='ignore',
    )

    app: AppSettings = Field(default_factory=AppSettings)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    env: Environment = Field(default_factory=Environment.current, description="Current run environment")


class _SettingsTesting(Settings):
    model_config = SettingsConfigDict(
        env_file=(ROOT_PATH / '.env.testing'),
        env_file_encoding='utf-8',
        env_nested_delimiter='__',
        extra='ignore',
    )
    env: Environment = Field(default_factory=lambda: Environment("testing"), description="Current run environment")


class _SettingsDevelopment(Settings):
    model_config = SettingsConfigDict(
        env_file=(ROOT_PATH / '.env'),
        env_file_encoding='utf-8',
        env_nested_delimiter='__',
        extra='ignore',
    )
    env: Environment = Field(default_factory=lambda: Environment("development"), description="Current run environment")


# Global settings singleton, one per environment
SETTINGS: Dict[Environment, Settings] = {}

def get_settings() -> Settings:
    """Retrieve the settings of the current environment, built on first access.

    Example:
        >>> from kinforest.environment import set_current_env
        >>> set_current_env('testing')
        >>> get_settings().runtime.fold_workers
        1

    Note:
        Environment variables are read once per environment; later changes are
        not picked up.
    """
    current_env = Environment.current()
    if current_env not in SETTINGS:
        if current_env.is_testing():
            SETTINGS[current_env] = _SettingsTesting()
        else:
            SETTINGS[current_env] = _SettingsDevelopment()
    return SETTINGS[current_env]
