"""Tests for DYNCQ_* settings."""

import pytest

from src.config import ConfigError, Settings, load_settings, validate_settings


def test_defaults():
    settings = load_settings({})
    assert settings == Settings()
    assert settings.bench_sizes == (100, 1000, 10000)
    assert settings.log_level == "WARNING"


def test_values_from_environment():
    settings = load_settings(
        {
            "DYNCQ_LOG_LEVEL": "debug",
            "DYNCQ_SEED": "7",
            "DYNCQ_BENCH_SIZES": "10, 20",
            "DYNCQ_WARMUP_FRACTION": "0.25",
            "UNRELATED": "x",
        }
    )
    assert settings.log_level == "DEBUG"
    assert settings.seed == 7
    assert settings.bench_sizes == (10, 20)
    assert settings.warmup_fraction == 0.25


def test_blank_values_fall_back_to_defaults():
    assert load_settings({"DYNCQ_SEED": "  "}).seed == 0


@pytest.mark.parametrize(
    "name, value",
    [
        ("DYNCQ_FUZZ_RUNS", "0"),
        ("DYNCQ_MAX_VARS", "many"),
        ("DYNCQ_BENCH_SIZES", "10,x"),
        ("DYNCQ_BENCH_SIZES", "10,-1"),
        ("DYNCQ_WARMUP_FRACTION", "1.0"),
        ("DYNCQ_LOG_LEVEL", "chatty"),
    ],
)
def test_invalid_values(name, value):
    with pytest.raises(ConfigError) as info:
        load_settings({name: value})
    assert str(info.value).startswith(name)


def test_validate_settings_reports_status():
    good = validate_settings({"DYNCQ_SEED": "3"})
    assert good["valid"]
    assert good["details"]["provided"] == ["DYNCQ_SEED"]
    assert good["details"]["settings"]["seed"] == 3

    bad = validate_settings({"DYNCQ_FUZZ_RUNS": "-2"})
    assert not bad["valid"]
    assert "DYNCQ_FUZZ_RUNS" in bad["message"]
