"""
This module builds the oracle and embedder selected on the command line.

Functions:
    build_oracle(args, settings) -> RuleOracle | RemoteOracle
    build_embedder(args, settings) -> EmbeddingProvider
    load_engine_config(path) -> EngineConfig
"""
import argparse
import logging
from pathlib import Path

from core.config import EngineConfig, load_config
from core.settings import RemoteSettings
from embedding.embedding_provider import DeterministicEmbedder, EmbeddingProvider, RemoteEmbedder
from oracles.remote_oracle import FixtureReplayTransport, RemoteOracle, build_remote_oracle
from oracles.rule_oracle import RuleOracle

logger = logging.getLogger(__name__)

REMOTE_EMBED_DIMENSION = 1536


def build_oracle(args: argparse.Namespace, settings: RemoteSettings) -> RuleOracle | RemoteOracle:
    """
    The oracle for `--oracle`.

    Raises:
        OracleUnavailableError: For `--oracle remote` without FADEMEM_LLM_URL and without recorded fixtures.
    """
    if getattr(args, "oracle", "rule") == "rule":
        return RuleOracle()
    fixtures = getattr(args, "oracle_fixtures", None)
    if fixtures:
        logger.info("Replaying remote oracle exchanges from %s", fixtures)
        return RemoteOracle(FixtureReplayTransport(Path(fixtures)), model=settings.llm_model, max_retries=0)
    return build_remote_oracle(settings)


def build_embedder(args: argparse.Namespace, settings: RemoteSettings) -> EmbeddingProvider:
    if getattr(args, "embedder", "deterministic") == "remote":
        return RemoteEmbedder(settings.embed_url, settings.embed_key, REMOTE_EMBED_DIMENSION, settings.timeout_seconds)
    return DeterministicEmbedder()


def load_engine_config(path: str | None) -> EngineConfig:
    """The config file at `path`, or the defaults."""
    if path is None:
        return EngineConfig()
    return load_config(path)
