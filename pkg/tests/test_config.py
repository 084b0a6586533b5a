import logging

import pytest

from bamlearn.config import (
    RunConfig,
    config_hash,
    pair_policy,
    parse_config,
    parse_config_text,
    to_text,
)
from bamlearn.errors import ConfigError


def test_empty_config_defaults():
    cfg = parse_config_text("")
    assert cfg.loss.temperature == 0.1 and cfg.loss.target_temperature == 0.05
    assert cfg.loss.mask_positives and cfg.loss.global_norm
    assert cfg.loss.mode == "bam" and cfg.batch.k == 2
    assert parse_config() == cfg


def test_values_and_types():
    cfg = parse_config_text("""
[loss]
mode = vanilla
mask_positives = false
[model]
encoder_dims = 16, 8
[optim]
lr = 0.2
""")
    assert cfg.loss.mode == "vanilla" and cfg.loss.mask_positives is False
    assert cfg.model.encoder_dims == (16, 8) and cfg.optim.lr == 0.2


def test_zero_target_temperature_rejected():
    with pytest.raises(ConfigError, match="target_temperature must be positive"):
        parse_config_text("[loss]\ntarget_temperature = 0\n")


def test_equal_temperatures_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="bamlearn.config"):
        cfg = parse_config_text("[loss]\ntarget_temperature = 0.1\n")
    assert cfg.loss.target_temperature == 0.1
    assert any("collapse" in r.message for r in caplog.records)


@pytest.mark.parametrize("text, key", [
    ("[loss]\ntemprature = 0.1\n", "loss.temprature"),
    ("[optim]\nsteps = many\n", "optim.steps"),
    ("[batch]\nk = 1\n", "batch.k"),
    ("[teacher]\nmomentum = 1.5\n", "teacher.momentum"),
    ("[bogus]\nx = 1\n", "bogus"),
])
def test_errors_name_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config_text(text)


def test_overrides():
    cfg = parse_config_text("[run]\nseed = 1\n", {"run.seed": 5})
    assert cfg.run.seed == 5


def test_roundtrip_and_hash():
    cfg = RunConfig().with_changes(loss={"mode": "contrastive"}, batch={"n": 16})
    back = parse_config_text(to_text(cfg))
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)
    assert config_hash(RunConfig()) != config_hash(cfg)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/config.ini")


def test_pair_policy_from_config():
    cfg = RunConfig().with_changes(batch={"k": 4}, loss={"pair_policy": "exclude_local:2,3"})
    pol = pair_policy(cfg)
    assert (2, 3) not in pol.pairs and len(pol.pairs) == 10
