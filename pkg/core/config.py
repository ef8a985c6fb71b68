"""
This module holds the engine configuration and its validation.

Classes:
    EngineConfig: Every hyperparameter of the decay, conflict and fusion dynamics plus capacities.

Functions:
    validate_config(cfg: EngineConfig) -> EngineConfig:
        Returns the config unchanged, or raises ConfigError naming the first violated invariant.

    load_config(path: str | Path) -> EngineConfig:
        Reads a flat TOML or JSON document whose keys mirror EngineConfig exactly.

    dump_config(cfg: EngineConfig) -> dict[str, float | int | bool]:
        Flat key/value form of the config, the inverse of load_config.
"""
import json
import math
import tomllib
from collections.abc import Callable
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError

from core.exceptions import ConfigError

WEIGHT_SUM_TOLERANCE = 1e-9


class EngineConfig(BaseModel):
    """
    Engine hyperparameters.

    Defaults follow the published grid-search values where they exist
    (lambda_base, theta_promote, theta_demote, theta_fusion, capacities, shape exponents);
    the rest are order-of-magnitude choices for a 30-day horizon. Rates are per day.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = 0.5
    beta_freq: float = 0.3
    gamma: float = 0.2
    delta: float = 0.1
    kappa: float = 0.1
    theta_promote: float = 0.7
    theta_demote: float = 0.3
    lambda_base: float = 0.1
    mu: float = 1.0
    shape_lml: float = 0.8
    shape_sml: float = 1.2
    delta_v: float = 0.2
    window_days: float = 7.0
    big_n: float = 5.0
    eps_prune: float = 0.05
    t_max_days: float = 45.0
    theta_sim: float = 0.8
    omega: float = 0.25
    rho: float = 0.5
    w_age_days: float = 30.0
    theta_fusion: float = 0.75
    t_window_days: float = 3.0
    cluster_min_size: int = 3
    eps_var: float = 0.1
    theta_preserve: float = 0.8
    cap_lml: int = 1000
    cap_sml: int = 500
    context_window_len: int = 5
    dual_layer: bool = True
    conflict_resolution: bool = True
    fusion: bool = True


_POSITIVE_FIELDS = (
    "delta",
    "kappa",
    "lambda_base",
    "shape_lml",
    "shape_sml",
    "delta_v",
    "window_days",
    "big_n",
    "t_max_days",
    "theta_sim",
    "rho",
    "w_age_days",
    "theta_fusion",
    "t_window_days",
    "theta_preserve",
    "theta_promote",
    "theta_demote",
    "cluster_min_size",
    "cap_lml",
    "cap_sml",
    "context_window_len",
)
_NON_NEGATIVE_FIELDS = ("alpha", "beta_freq", "gamma", "mu", "eps_prune", "omega", "eps_var")
_UNIT_BOUNDED_FIELDS = (
    "theta_promote",
    "theta_demote",
    "theta_sim",
    "theta_fusion",
    "theta_preserve",
    "delta_v",
    "omega",
)


def _invariant_rules() -> list[tuple[str, Callable[[EngineConfig], bool]]]:
    rules: list[tuple[str, Callable[[EngineConfig], bool]]] = []
    for field_name in (*_POSITIVE_FIELDS, *_NON_NEGATIVE_FIELDS):
        rules.append((
            f"{field_name} must be finite",
            lambda cfg, name=field_name: math.isfinite(getattr(cfg, name)),
        ))
    for field_name in _NON_NEGATIVE_FIELDS:
        rules.append((f"{field_name} must be non-negative", lambda cfg, name=field_name: getattr(cfg, name) >= 0))
    rules.append((
        "importance weights alpha + beta_freq + gamma must sum to 1",
        lambda cfg: abs(cfg.alpha + cfg.beta_freq + cfg.gamma - 1) <= WEIGHT_SUM_TOLERANCE,
    ))
    rules.append((
        "hysteresis violated: theta_promote must exceed theta_demote",
        lambda cfg: cfg.theta_promote > cfg.theta_demote,
    ))
    for field_name in _POSITIVE_FIELDS:
        rules.append((f"{field_name} must be positive", lambda cfg, name=field_name: getattr(cfg, name) > 0))
    for field_name in _UNIT_BOUNDED_FIELDS:
        rules.append((f"{field_name} must not exceed 1", lambda cfg, name=field_name: getattr(cfg, name) <= 1))
    rules.append(("eps_prune must be below 1", lambda cfg: cfg.eps_prune < 1))
    return rules


_RULES = _invariant_rules()


def validate_config(cfg: EngineConfig) -> EngineConfig:
    """
    Checks every EngineConfig invariant in a fixed order.

    Args:
        cfg (EngineConfig): The configuration to check.

    Returns:
        EngineConfig: The same object, unchanged.

    Raises:
        ConfigError: Naming the first violated invariant.
    """
    for message, holds in _RULES:
        if not holds(cfg):
            raise ConfigError(message)
    return cfg


def load_config(path: str | Path) -> EngineConfig:
    """
    Reads and validates a flat config document.

    Args:
        path (str | Path): A `.toml` or `.json` file with EngineConfig keys only.

    Returns:
        EngineConfig: The validated configuration.

    Raises:
        ConfigError: If the file is unreadable, has unknown keys, wrong types or violates an invariant.
    """
    config_path = Path(path)
    try:
        raw_text = config_path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"cannot read config file {config_path}: {error}") from error
    try:
        if config_path.suffix == ".json":
            document = json.loads(raw_text)
        else:
            document = tomllib.loads(raw_text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as error:
        raise ConfigError(f"config file {config_path} is not well-formed: {error}") from error
    if not isinstance(document, dict):
        raise ConfigError(f"config file {config_path} must hold a flat key/value document")
    try:
        cfg = EngineConfig.model_validate(document)
    except ValidationError as error:
        first = error.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid config key {location}: {first['msg']}") from error
    return validate_config(cfg)


def dump_config(cfg: EngineConfig) -> dict[str, float | int | bool]:
    """Flat key/value form of the config, suitable for TOML or JSON."""
    return cfg.model_dump()
