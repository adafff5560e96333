"""
Tests for config.settings using pytest best practices.
"""

from pathlib import Path

import pytest
from src.circuit_collectives.config import settings as settings_module
from src.circuit_collectives.config.settings import (
    SimulationSettings,
    load_settings,
    read_config_file,
    resolve_workers,
)
from src.circuit_collectives.error_management.exceptions import ConfigurationError


@pytest.fixture  # type: ignore[misc]
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "sim.toml"
    path.write_text(
        'reconf_delay_s = 1e-3\nstandard_set = ["torus2d"]\ndirected_edge_capacity = true\n',
        encoding="utf-8",
    )
    return path


class TestLoadSettings:
    """Test cases for load_settings."""

    @pytest.mark.unit
    def test_defaults(self) -> None:
        """Test no file and no overrides gives the built-in defaults."""
        assert load_settings() == SimulationSettings()

    @pytest.mark.unit
    def test_mesh_lanes_default_directed(self) -> None:
        """Test waveguide lanes are per direction unless turned off."""
        assert SimulationSettings().mesh_directed_waveguides is True
        settings = load_settings(overrides={"mesh_directed_waveguides": "off"})

        assert settings.mesh_directed_waveguides is False

    @pytest.mark.unit
    def test_file_values(self, config_file: Path) -> None:
        """Test TOML values replace the defaults."""
        settings = load_settings(config_file)

        assert settings.reconf_delay_s == 1e-3
        assert settings.standard_set == ("torus2d",)
        assert settings.directed_edge_capacity is True
        assert settings.alpha_s == 3e-6

    @pytest.mark.unit
    def test_file_from_environment(
        self, config_file: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test PCCL_SIM_CONFIG names the file when none is passed."""
        monkeypatch.setenv("PCCL_SIM_CONFIG", str(config_file))

        assert load_settings().reconf_delay_s == 1e-3

    @pytest.mark.unit
    def test_overrides_win(self, config_file: Path) -> None:
        """Test explicit overrides beat the file and None means unset."""
        settings = load_settings(config_file, {"reconf_delay_s": 5e-5, "alpha_s": None})

        assert settings.reconf_delay_s == 5e-5
        assert settings.alpha_s == 3e-6

    @pytest.mark.unit
    def test_unknown_key(self, tmp_path: Path) -> None:
        """Test a misspelled key is a configuration error."""
        path = tmp_path / "sim.toml"
        path.write_text("reconf_delay = 1e-3\n", encoding="utf-8")

        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(path)

        assert exc_info.value.missing_config == "reconf_delay"

    @pytest.mark.unit
    def test_invalid_value(self) -> None:
        """Test a negative coefficient names its key."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(overrides={"alpha_s": -1.0})

        assert exc_info.value.missing_config == "alpha_s"
        assert exc_info.value.context["validation_type"] == "min_value"

    @pytest.mark.unit
    @pytest.mark.parametrize(
        ("key", "value"),
        [
            ("mesh_penalize_factor", 1.0),
            ("disconnect_penalty_s", 0.0),
            ("tx_per_gpu", 0),
            ("standard_set", ["hypercube"]),
            ("planner_candidates", []),
            ("planner_candidates", ["dex"]),
            ("mesh_directed_waveguides", "sometimes"),
        ],
    )
    def test_rejected_values(self, key: str, value: object) -> None:
        """Test range and choice checks per key."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(overrides={key: value})

        assert exc_info.value.missing_config == key

    @pytest.mark.unit
    def test_workers_zero_uses_physical_cores(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test the 0 sentinel resolves through psutil."""
        monkeypatch.setattr(settings_module.psutil, "cpu_count", lambda logical=True: 6)

        assert load_settings(overrides={"workers": 0}).workers == 6


class TestHelpers:
    """Test cases for the settings helpers."""

    @pytest.mark.unit
    def test_resolve_workers_unknown_core_count(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test an unknown core count falls back to one worker."""
        monkeypatch.setattr(settings_module.psutil, "cpu_count", lambda logical=True: None)

        assert resolve_workers(0) == 1
        assert resolve_workers(3) == 3

    @pytest.mark.unit
    def test_missing_file(self, tmp_path: Path) -> None:
        """Test an absent file points at the environment variable."""
        with pytest.raises(ConfigurationError) as exc_info:
            read_config_file(tmp_path / "absent.toml")

        assert exc_info.value.missing_config == "PCCL_SIM_CONFIG"

    @pytest.mark.unit
    def test_malformed_toml(self, tmp_path: Path) -> None:
        """Test a TOML syntax error is reported with the path."""
        path = tmp_path / "sim.toml"
        path.write_text("alpha_s = = 1\n", encoding="utf-8")

        with pytest.raises(ConfigurationError) as exc_info:
            read_config_file(path)

        assert exc_info.value.context["path"] == str(path)

    @pytest.mark.unit
    def test_cost_params(self) -> None:
        """Test the cost-model view of the settings."""
        params = SimulationSettings(alpha_s=1e-6, reconf_delay_s=0.0).cost_params()

        assert params.alpha == 1e-6
        assert params.reconf_delay == 0.0
        assert params.disconnect_penalty == 1e6

    @pytest.mark.unit
    def test_to_dict(self) -> None:
        """Test tuples become lists for report metadata."""
        data = SimulationSettings(standard_set=("ring",)).to_dict()

        assert data["standard_set"] == ["ring"]
        assert data["planner_candidates"] == ["rhd", "ring", "bucket"]
