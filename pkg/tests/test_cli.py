import asyncio

import pytest

from benchmark.report_writer import METRICS_CSV, METRICS_JSON
from core.exceptions import EmbeddingDimensionError
from handlers import store_handlers
from handlers.simulate_handler import SNAPSHOT_NAME, TRACE_NAME
from run_fademem import main
from store.snapshot_manager import load_snapshot


@pytest.fixture
def store_path(tmp_path) -> str:
    return str(tmp_path / "memories.fmem")


def test_simulate_needs_at_least_one_day(tmp_path) -> None:
    assert main(["simulate", "--days", "0", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("argv", [["forget"], [], ["query", "--text", "alice"], ["simulate", "--k", "0", "--out", "x"]])
def test_usage_errors(argv: list[str]) -> None:
    assert main(argv) == 1


def test_remote_oracle_without_endpoint(tmp_path, monkeypatch, capsys) -> None:
    monkeypatch.delenv("FADEMEM_LLM_URL", raising=False)

    assert main(["simulate", "--days", "2", "--oracle", "remote", "--out", str(tmp_path)]) == 3
    assert "FADEMEM_LLM_URL" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path, capsys) -> None:
    first = tmp_path / "first"
    second = tmp_path / "second"

    assert main(["simulate", "--seed", "7", "--days", "5", "--out", str(first)]) == 0
    assert main(["simulate", "--seed", "7", "--days", "5", "--out", str(second)]) == 0

    for name in (METRICS_JSON, METRICS_CSV, SNAPSHOT_NAME, TRACE_NAME):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    output = capsys.readouterr().out
    assert "fademem" in output
    assert "strength histogram" in output


def test_observe_then_query(store_path: str, capsys) -> None:
    assert main(["observe", "--store", store_path, "--text", "alice likes tea", "--at", "0", "--category", "critical"]) == 0
    assert capsys.readouterr().out.strip() == "stored as m000001"

    assert main(["query", "--store", store_path, "--text", "alice likes tea", "--k", "1"]) == 0

    rank, record_id, _, strength, layer, content = capsys.readouterr().out.strip().split("\t")
    assert (rank, record_id, layer, content) == ("1", "m000001", "SML", "alice likes tea")
    assert float(strength) >= 0.99


def test_duplicate_observation_is_absorbed(store_path: str, capsys) -> None:
    main(["observe", "--store", store_path, "--text", "alice likes tea", "--at", "0"])
    capsys.readouterr()

    assert main(["observe", "--store", store_path, "--text", "Alice likes tea.", "--at", "1"]) == 0

    lines = capsys.readouterr().out.splitlines()
    assert lines == ["absorbed into m000001", "  subsumed -> m000001"]


def test_untouched_memory_is_forgotten(store_path: str, capsys) -> None:
    main(["observe", "--store", store_path, "--text", "alice likes tea", "--at", "0"])

    assert main(["tick", "--store", store_path, "--days", "30"]) == 0
    assert main(["stats", "--store", store_path]) == 0

    output = capsys.readouterr().out
    assert "clock 30.000, removed 1" in output
    assert "memories   0" in output


def test_negative_tick_is_a_usage_error(store_path: str) -> None:
    main(["observe", "--store", store_path, "--text", "alice likes tea", "--at", "0"])

    assert main(["tick", "--store", store_path, "--days", "-1"]) == 1


def test_missing_or_corrupt_snapshot(store_path: str, tmp_path) -> None:
    assert main(["stats", "--store", store_path]) == 2

    corrupt = tmp_path / "corrupt.fmem"
    corrupt.write_bytes(b"FADEMEM1 but not really a snapshot")
    assert main(["stats", "--store", str(corrupt)]) == 2


def test_clock_regression(store_path: str) -> None:
    main(["observe", "--store", store_path, "--text", "alice likes tea", "--at", "5"])

    assert main(["observe", "--store", store_path, "--text", "bob repairs bicycles", "--at", "1"]) == 1


def test_invalid_config_file(store_path: str, tmp_path) -> None:
    config_path = tmp_path / "engine.toml"
    config_path.write_text("theta_promote = 0.2\ntheta_demote = 0.4\n")

    assert main(["observe", "--store", store_path, "--text", "alice", "--config", str(config_path)]) == 2


def test_exported_log_replays_to_the_same_store(store_path: str, tmp_path) -> None:
    commands = [
        ["observe", "--text", "fav_color|alice|blue", "--at", "0", "--category", "critical"],
        ["observe", "--text", "bob repairs bicycles", "--at", "0.5", "--category", "contextual"],
        ["query", "--text", "alice", "--k", "2", "--at", "1"],
        ["observe", "--text", "fav_color|alice|red", "--at", "6", "--category", "critical"],
        ["tick", "--days", "2"],
    ]
    for command in commands:
        assert main([command[0], "--store", store_path, *command[1:]]) == 0
    trace_path = tmp_path / "exported.jsonl"
    out_dir = tmp_path / "replayed"

    assert main(["export", "--store", store_path, "--out", str(trace_path)]) == 0
    assert main(["simulate", "--replay", str(trace_path), "--out", str(out_dir)]) == 0

    original = asyncio.run(load_snapshot(store_path))
    replayed = asyncio.run(load_snapshot(out_dir / SNAPSHOT_NAME))
    assert replayed.stats() == original.stats()
    assert replayed.records == original.records


class ShortVectorEmbedder:
    """Remote-style embedder whose endpoint answers with vectors of the wrong length."""

    async def embed(self, text: str) -> tuple[float, ...]:
        raise EmbeddingDimensionError("remote embedder returned 3 values, expected 256")

    def dimension(self) -> int:
        return 256


def test_embedder_dimension_mismatch_is_an_embedder_failure(store_path: str, monkeypatch, capsys) -> None:
    monkeypatch.setattr(store_handlers, "build_embedder", lambda args, settings: ShortVectorEmbedder())

    assert main(["observe", "--store", store_path, "--text", "alice likes tea", "--embedder", "remote"]) == 3
    assert "expected 256" in capsys.readouterr().err
