"""
Run settings for the simulator.

Defaults come from the constants modules. A TOML file named by PCCL_SIM_CONFIG can override
any of them, and explicit overrides (CLI flags) win over both. Example file:

    alpha_s = 3e-6
    reconf_delay_s = 500e-6
    standard_set = ["torus2d"]
    workers = 0
"""

from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import psutil
import tomli

from src.circuit_collectives.config.error_constants import (
    ERROR_CONFIG_UNKNOWN_KEY,
    ERROR_CONFIG_UNREADABLE,
)
from src.circuit_collectives.config.key_constants import CONFIG_PATH_ENV, get_config_path
from src.circuit_collectives.config.logging_config import get_logger
from src.circuit_collectives.config.routing_constants import (
    DEFAULT_SEED,
    MESH_DIRECTED_WAVEGUIDES,
    MESH_MAX_OVERLAP,
    MESH_PENALIZE_FACTOR,
    MESH_TRIALS,
)
from src.circuit_collectives.config.sim_constants import (
    ALPHA_S,
    BASELINE_TOPOLOGIES,
    BETA_S_PER_BYTE,
    DEFAULT_WORKERS,
    DIRECTED_EDGE_CAPACITY,
    DISCONNECT_PENALTY_S,
    PLANNER_CANDIDATES,
    RECONF_DELAY_S,
    RX_PER_GPU,
    STANDARD_SET,
    TX_PER_GPU,
)
from src.circuit_collectives.error_management.exceptions import (
    ConfigurationError,
    ValidationError,
)
from src.circuit_collectives.error_management.validator import Validator
from src.circuit_collectives.tools.cost_model import CostParams

logger = get_logger("config.settings")


@dataclass(frozen=True)
class SimulationSettings:
    """Effective parameters of one simulator invocation."""

    alpha_s: float = ALPHA_S
    beta_s_per_byte: float = BETA_S_PER_BYTE
    reconf_delay_s: float = RECONF_DELAY_S
    disconnect_penalty_s: float = DISCONNECT_PENALTY_S
    directed_edge_capacity: bool = DIRECTED_EDGE_CAPACITY
    tx_per_gpu: int = TX_PER_GPU
    rx_per_gpu: int = RX_PER_GPU
    standard_set: tuple[str, ...] = STANDARD_SET
    planner_candidates: tuple[str, ...] = PLANNER_CANDIDATES
    mesh_trials: int = MESH_TRIALS
    mesh_penalize_factor: float = MESH_PENALIZE_FACTOR
    mesh_max_overlap: int = MESH_MAX_OVERLAP
    mesh_directed_waveguides: bool = MESH_DIRECTED_WAVEGUIDES
    workers: int = DEFAULT_WORKERS
    seed: int = DEFAULT_SEED

    def cost_params(self) -> CostParams:
        """Cost-model parameters carried by these settings."""
        return CostParams(
            alpha=self.alpha_s,
            beta=self.beta_s_per_byte,
            reconf_delay=self.reconf_delay_s,
            disconnect_penalty=self.disconnect_penalty_s,
            directed_edge_capacity=self.directed_edge_capacity,
        )

    def to_dict(self) -> dict[str, Any]:
        """Plain-dict view, for run metadata in reports."""
        data = asdict(self)
        data["standard_set"] = list(self.standard_set)
        data["planner_candidates"] = list(self.planner_candidates)
        return data


def _validate_kinds(value: Any, field_name: str, choices: tuple[str, ...]) -> tuple[str, ...]:
    items = Validator.validate_sequence(value, field_name)
    return tuple(
        Validator.validate_choice(item, f"{field_name}[{i}]", choices)
        for i, item in enumerate(items)
    )


def _coerce(name: str, value: Any) -> Any:
    """Validate one settings value by field name."""
    match name:
        case "alpha_s" | "beta_s_per_byte" | "reconf_delay_s":
            return Validator.validate_number(value, name, min_value=0.0)
        case "disconnect_penalty_s":
            return Validator.validate_number(value, name, min_value=0.0, exclusive_min=True)
        case "mesh_penalize_factor":
            return Validator.validate_number(value, name, min_value=1.0, exclusive_min=True)
        case "directed_edge_capacity" | "mesh_directed_waveguides":
            return Validator.validate_boolean(value, name)
        case "tx_per_gpu" | "rx_per_gpu" | "mesh_trials" | "mesh_max_overlap":
            return Validator.validate_integer(value, name, min_value=1)
        case "workers" | "seed":
            return Validator.validate_integer(value, name, min_value=0)
        case "standard_set":
            return _validate_kinds(value, name, BASELINE_TOPOLOGIES)
        case "planner_candidates":
            candidates = _validate_kinds(value, name, PLANNER_CANDIDATES)
            if not candidates:
                raise ValidationError(
                    f"{name} must not be empty",
                    field=name,
                    value=value,
                    context={"validation_type": "min_length", "min_length": 1},
                )
            return candidates
        case _:
            raise ConfigurationError(ERROR_CONFIG_UNKNOWN_KEY % name, missing_config=name)


def read_config_file(path: str | Path) -> dict[str, Any]:
    """
    Parse a TOML override file.

    Raises:
        ConfigurationError: If the file is missing or not valid TOML
    """
    try:
        with Path(path).open("rb") as handle:
            data = tomli.load(handle)
    except (OSError, tomli.TOMLDecodeError) as e:
        raise ConfigurationError(
            ERROR_CONFIG_UNREADABLE % path,
            missing_config=CONFIG_PATH_ENV,
            context={"path": str(path), "original_error": str(e)},
        ) from e
    logger.debug("Loaded configuration overrides", extra={"path": str(path), "keys": sorted(data)})
    return data


def resolve_workers(workers: int) -> int:
    """Map the 0 sentinel to one worker per physical core."""
    if workers > 0:
        return workers
    return psutil.cpu_count(logical=False) or 1


def load_settings(
    config_path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> SimulationSettings:
    """
    Build the effective settings: defaults, then the TOML file, then explicit overrides.

    Args:
        config_path: TOML file; defaults to the file named by PCCL_SIM_CONFIG
        overrides: Values that win over the file; None values are ignored

    Returns:
        Frozen settings with the worker count resolved

    Raises:
        ConfigurationError: On unknown keys, unreadable files or invalid values
    """
    values: dict[str, Any] = {}
    path = config_path if config_path is not None else get_config_path()
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})

    known = {field.name for field in fields(SimulationSettings)}
    for key in values:
        if key not in known:
            raise ConfigurationError(ERROR_CONFIG_UNKNOWN_KEY % key, missing_config=key)

    coerced: dict[str, Any] = {}
    for key, value in values.items():
        try:
            coerced[key] = _coerce(key, value)
        except ValidationError as e:
            raise ConfigurationError(
                f"Invalid value for {key}: {e.message}",
                missing_config=key,
                context={"value": str(value), **e.context},
            ) from e

    if "workers" in coerced:
        coerced["workers"] = resolve_workers(coerced["workers"])
    settings = SimulationSettings(**coerced)
    logger.debug("Effective settings", extra={"settings": settings.to_dict()})
    return settings
