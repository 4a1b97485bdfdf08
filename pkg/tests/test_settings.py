import json

import pytest

from errors import DomainError
from settings import RunConfig, Settings


def test_settings_round_trip_all_user_options(tmp_path):
    settings_path = tmp_path / "settings.json"
    settings = Settings(settings_path)
    settings.set("precision_bits", 256)
    settings.set("output_format", "csv")
    settings.set("grid_steps", ["0.5", "1"])

    loaded = Settings(settings_path)
    assert loaded.get("precision_bits") == 256
    assert loaded.get("output_format") == "csv"
    assert loaded.get("grid_steps") == ["0.5", "1"]
    assert loaded.get("seed") == 0


def test_settings_clamp_invalid_values(tmp_path):
    settings_path = tmp_path / "settings.json"
    settings_path.write_text(
        json.dumps(
            {
                "precision_bits": 8,
                "budget": -5,
                "shift_points": 1,
                "refinement_depth": 5000,
                "output_format": "xml",
                "tolerance": "-1",
                "grid_steps": ["0.5", "zero"],
            }
        ),
        encoding="utf-8",
    )
    settings = Settings(settings_path)
    assert settings.get("precision_bits") == 64
    assert settings.get("budget") == 1
    assert settings.get("shift_points") == 2
    assert settings.get("refinement_depth") == 1000
    assert settings.get("output_format") == "table"
    assert settings.get("tolerance") == "1e-10"
    assert settings.get("grid_steps") == ["0.1", "0.25", "0.5", "1"]


def test_corrupt_settings_are_backed_up(tmp_path):
    settings_path = tmp_path / "settings.json"
    settings_path.write_text("{broken", encoding="utf-8")
    settings = Settings(settings_path)
    assert settings.get("precision_bits") == 128
    assert (tmp_path / "settings.json.bak").exists()


def test_run_config_layers_settings_environment_and_flags(tmp_path):
    settings = Settings(tmp_path / "settings.json")
    settings.set("precision_bits", 192)
    settings.set("seed", 7)

    config = RunConfig.from_sources(settings, environ={})
    assert config.precision_bits == 192
    assert config.seed == 7

    config = RunConfig.from_sources(settings, environ={"POLYALAB_PRECISION": "320"})
    assert config.precision_bits == 320

    config = RunConfig.from_sources(
        settings, environ={"POLYALAB_PRECISION": "320"}, precision_bits=512, seed=None
    )
    assert config.precision_bits == 512
    assert config.seed == 7


def test_run_config_ignores_malformed_environment():
    config = RunConfig.from_sources(None, environ={"POLYALAB_PRECISION": "lots"})
    assert config.precision_bits == 128
    assert config.grid_steps == ("0.1", "0.25", "0.5", "1")


@pytest.mark.parametrize(
    "overrides",
    [
        {"precision_bits": 32},
        {"budget": 0},
        {"output_format": "xml"},
        {"tolerance": "abc"},
    ],
)
def test_run_config_rejects_bad_values(overrides):
    with pytest.raises(DomainError):
        RunConfig(**overrides)


def test_tolerance_value_is_exact():
    assert RunConfig(tolerance="0.5").tolerance_value == 0.5


def test_set_applies_load_validation(tmp_path):
    settings = Settings(tmp_path / "settings.json")
    settings.set("precision_bits", 10)
    settings.set("tolerance", 1e-12)
    assert settings.get("precision_bits") == 64
    assert settings.get("tolerance") == "1e-12"
    assert Settings(tmp_path / "settings.json").get("precision_bits") == 64


@pytest.mark.parametrize(
    ("key", "value"),
    [("unknown", 1), ("seed", "seven"), ("budget", True), ("shift_points", float("nan"))],
)
def test_set_rejects_unknown_keys_and_bad_values(tmp_path, key, value):
    settings = Settings(tmp_path / "settings.json")
    with pytest.raises(DomainError):
        settings.set(key, value)
    assert not (tmp_path / "settings.json").exists()
