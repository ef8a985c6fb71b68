"""
This module reads the process environment (or a `.env` file) for the remote services.

Classes:
    RemoteSettings: Endpoints, keys and limits for the remote oracle and embedder.

Functions:
    get_remote_settings() -> RemoteSettings:
        Reads the FADEMEM_* variables through python-decouple.

    get_log_level() -> str:
        Log level for the entry script, FADEMEM_LOG_LEVEL or WARNING.
"""
from decouple import config
from pydantic import BaseModel, ConfigDict

DEFAULT_LLM_MODEL = "gpt-4o-mini"


class RemoteSettings(BaseModel):
    """Connection settings for the chat-completion oracle and the remote embedder."""

    model_config = ConfigDict(frozen=True)

    llm_url: str = ""
    llm_key: str = ""
    llm_model: str = DEFAULT_LLM_MODEL
    embed_url: str = ""
    embed_key: str = ""
    timeout_seconds: float = 30.0
    max_retries: int = 3
    backoff_seconds: float = 0.5
    max_in_flight: int = 4


def get_remote_settings() -> RemoteSettings:
    """
    Reads the remote settings from the environment.

    Returns:
        RemoteSettings: Empty strings for every endpoint or key that is not defined.
    """
    return RemoteSettings(
        llm_url=str(config("FADEMEM_LLM_URL", default="")),
        llm_key=str(config("FADEMEM_LLM_KEY", default="")),
        llm_model=str(config("FADEMEM_LLM_MODEL", default=DEFAULT_LLM_MODEL)),
        embed_url=str(config("FADEMEM_EMBED_URL", default="")),
        embed_key=str(config("FADEMEM_EMBED_KEY", default="")),
        timeout_seconds=float(config("FADEMEM_LLM_TIMEOUT", default=30.0, cast=float)),
        max_retries=int(config("FADEMEM_LLM_RETRIES", default=3, cast=int)),
        max_in_flight=int(config("FADEMEM_LLM_MAX_IN_FLIGHT", default=4, cast=int)),
    )


def get_log_level() -> str:
    """Log level name for the entry script."""
    return str(config("FADEMEM_LOG_LEVEL", default="WARNING")).upper()
