"""
Configuration constants and settings for the circuit collectives simulator.

This package contains all configuration constants organized by domain:
- sim_constants: cost-model parameters, sweeps and report formatting
- routing_constants: mesh router and fiber planner search limits
- fixture_constants: transformer task-graph fixture shape
- error_constants: error messages shared by the error management package
- key_constants: environment variables
- settings: frozen run settings with TOML overrides
- logging_config: logging configuration and setup

Usage:
    from src.circuit_collectives.config.sim_constants import ALPHA_S
    from src.circuit_collectives.config.settings import load_settings
"""
