"""
Key constants module for environment variable access.

Provides centralized access to the environment variables read by the simulator.
"""

import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Name of the variable pointing at a TOML file with parameter overrides
CONFIG_PATH_ENV = "PCCL_SIM_CONFIG"

# Logging
LOG_LEVEL_ENV = "LOG_LEVEL"
LOG_DIR_ENV = "LOG_DIR"
ENVIRONMENT_ENV = "ENVIRONMENT"

DEFAULT_LOG_DIR = "logs"
DEFAULT_ENVIRONMENT = "development"


def get_configuration_value(env_key: str, default: str | None = None) -> str | None:
    """
    Get a configuration value from the environment.

    Blank values are treated as unset.

    Args:
        env_key: Environment variable name
        default: Default value

    Returns:
        Configuration value or default
    """
    value = os.getenv(env_key)
    if value is None or not value.strip():
        return default
    return value.strip()


def get_config_path() -> str | None:
    """Return the override file named by PCCL_SIM_CONFIG, if any."""
    return get_configuration_value(CONFIG_PATH_ENV)
