import os

from enum import Enum
from typing import Self


OS_ENV_KEY = "APP_ENV" # Environment variable key for the run environment

class Environment(Enum):
    """Run environments; each reads its own dotenv file."""

    DEVELOPMENT = "development"
    TESTING     = "testing"

    @classmethod
    def current(cls) -> Self:
        """Get the current environment from the APP_ENV environment variable."""
        os.environ.setdefault(OS_ENV_KEY, "development")
        return cls(os.environ[OS_ENV_KEY].lower())

    @classmethod
    def set_current_to(cls, env: str | Self) -> None:
        try:
            instance = cls(env) if isinstance(env, str) else env
        except ValueError:
            raise ValueError(f"Invalid environment: {env}. Must be one of {[e.value for e in cls]}.") from None
        os.environ[OS_ENV_KEY] = instance.value

    def is_development(self) -> bool: return self == self.__class__.DEVELOPMENT
    def is_testing(self)     -> bool: return self == self.__class__.TESTING

    def dotenv_filename(self) -> str:
        return ".env" if self.is_development() else f".env.{self.value}"


def get_current_env() -> Environment: return Environment.current()
def set_current_env(env: str | Environment) -> Environment:
    """Sets the current environment to the specified value and returns it."""
    Environment.set_current_to(env)
    return get_current_env()
