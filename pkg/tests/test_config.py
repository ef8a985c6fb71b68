import json

import pytest

from core.config import EngineConfig, dump_config, load_config, validate_config
from core.exceptions import ConfigError


def test_default_config_is_valid() -> None:
    cfg = EngineConfig()
    assert validate_config(cfg) is cfg
    assert cfg.lambda_base == 0.1
    assert (cfg.cap_lml, cfg.cap_sml) == (1000, 500)


def test_inverted_thresholds_violate_hysteresis() -> None:
    with pytest.raises(ConfigError, match="hysteresis violated"):
        validate_config(EngineConfig(theta_promote=0.3, theta_demote=0.7))


def test_weights_summing_to_one_are_valid() -> None:
    validate_config(EngineConfig(alpha=0.5, beta_freq=0.3, gamma=0.2))
    validate_config(EngineConfig(alpha=0.6, beta_freq=0.2, gamma=0.2))


def test_weights_not_summing_to_one_are_rejected() -> None:
    with pytest.raises(ConfigError, match="sum to 1"):
        validate_config(EngineConfig(alpha=0.6))


@pytest.mark.parametrize(("field", "value", "message"), [
    ("lambda_base", 0.0, "lambda_base must be positive"),
    ("omega", -0.1, "omega must be non-negative"),
    ("theta_sim", 1.5, "theta_sim must not exceed 1"),
    ("eps_prune", 1.0, "eps_prune must be below 1"),
    ("cap_sml", 0, "cap_sml must be positive"),
    ("t_max_days", float("inf"), "t_max_days must be finite"),
])
def test_invariant_violations_are_named(field: str, value: float, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        validate_config(EngineConfig(**{field: value}))


def test_load_toml(tmp_path) -> None:
    path = tmp_path / "engine.toml"
    path.write_text("lambda_base = 0.2\ncap_sml = 10\ndual_layer = false\n", encoding="utf-8")

    cfg = load_config(path)

    assert cfg.lambda_base == 0.2
    assert cfg.cap_sml == 10
    assert cfg.dual_layer is False
    assert cfg.theta_sim == EngineConfig().theta_sim


def test_dump_then_load_json(tmp_path) -> None:
    cfg = EngineConfig(omega=0.15, cap_lml=12, fusion=False)
    path = tmp_path / "engine.json"
    path.write_text(json.dumps(dump_config(cfg)), encoding="utf-8")

    assert load_config(path) == cfg


def test_unknown_key_is_rejected(tmp_path) -> None:
    path = tmp_path / "engine.toml"
    path.write_text("unknown_key = 1\n", encoding="utf-8")

    with pytest.raises(ConfigError, match="unknown_key"):
        load_config(path)


def test_wrong_type_is_rejected(tmp_path) -> None:
    path = tmp_path / "engine.toml"
    path.write_text("cap_lml = 10.5\n", encoding="utf-8")

    with pytest.raises(ConfigError, match="cap_lml"):
        load_config(path)


def test_invalid_values_in_file_are_rejected(tmp_path) -> None:
    path = tmp_path / "engine.toml"
    path.write_text("theta_promote = 0.2\ntheta_demote = 0.6\n", encoding="utf-8")

    with pytest.raises(ConfigError, match="hysteresis"):
        load_config(path)


def test_malformed_and_missing_files(tmp_path) -> None:
    broken = tmp_path / "broken.toml"
    broken.write_text("lambda_base = = 1\n", encoding="utf-8")

    with pytest.raises(ConfigError, match="not well-formed"):
        load_config(broken)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
