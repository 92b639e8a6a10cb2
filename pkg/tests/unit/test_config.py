import pytest
from pydantic import ValidationError

from app.core.config import Settings, get_settings
from app.core.exceptions import ConfigError
from app.models.schemas import FragmentStrategy, RefMode


def test_defaults():
    settings = Settings(_env_file=None)
    config = settings.store_config()
    assert config.block_size == 65536
    assert config.segment_threshold == 8192
    assert config.strategy is FragmentStrategy.HETEROGENEOUS
    assert config.ref_mode is RefMode.INDIRECT
    assert settings.cost_params().tau == 0.2


def test_environment_prefix(monkeypatch):
    monkeypatch.setenv("RG_TAU", "0.5")
    monkeypatch.setenv("RG_FRAGMENT_STRATEGY", "pure_block")
    settings = Settings(_env_file=None)
    assert settings.cost_params().tau == 0.5
    assert settings.store_config().strategy is FragmentStrategy.PURE_BLOCK


def test_threshold_above_block_size_is_rejected():
    settings = Settings(_env_file=None, BLOCK_SIZE=1024, SEGMENT_THRESHOLD=4096)
    with pytest.raises(ConfigError, match="segment_threshold"):
        settings.store_config()


@pytest.mark.parametrize("tau", [0.0, -1.0, 1.5])
def test_tau_out_of_range(tau):
    with pytest.raises(ConfigError):
        Settings(_env_file=None, TAU=tau).cost_params()


def test_get_settings_is_cached():
    assert get_settings() is get_settings()


@pytest.mark.parametrize("field", ["CHUNK_SIZE", "BLOCK_SIZE", "SEGMENT_THRESHOLD", "BENCH_REPEAT"])
def test_counts_must_be_positive(field):
    with pytest.raises(ValidationError, match=field):
        Settings(_env_file=None, **{field: 0})
