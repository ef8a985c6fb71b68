"""
This module talks to an HTTPS chat-completion endpoint for relation, merge and preservation calls.

Classes:
    ChatTransport (Protocol): send(request body) -> response body.
    AiohttpChatTransport: Live transport over aiohttp with bearer authentication.
    FixtureReplayTransport: Answers from recorded `<key>.request.json` / `<key>.response.json` pairs.
    RecordingTransport: Wraps another transport and records every exchange as a fixture pair.
    RemoteOracle: RelationOracle, MergeOracle and PreservationOracle over a ChatTransport.

Functions:
    fixture_key(request: dict) -> str:
        Stable key of a request body.

    parse_relation(reply: str) -> Relation:
        First relation label in a reply, case-insensitive.

    parse_score(reply: str) -> float:
        First real number in [0, 1] in a reply.

    build_remote_oracle(settings: RemoteSettings) -> RemoteOracle:
        Live oracle from environment settings.
"""
import asyncio
import hashlib
import json
import logging
import re
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import aiofiles
import aiohttp

from conflict.conflict_models import Relation, RelationVerdict
from core.exceptions import (
    OracleAuthError,
    OracleError,
    OracleParseError,
    OracleTimeoutError,
    OracleUnavailableError,
)
from core.settings import RemoteSettings

logger = logging.getLogger(__name__)

JsonObject = dict[str, Any]

CLASSIFY_PROMPT = (
    "You compare two memories of an assistant. Answer with exactly one word first, one of: "
    "compatible, contradictory, subsumes, subsumed. 'subsumes' means memory A fully covers memory B, "
    "'subsumed' means memory B fully covers memory A. You may add a short reason after the label."
)
MERGE_PROMPT = (
    "Merge the following memories, given oldest first, into one text. Keep every unique fact, "
    "the temporal progression and any causal relation. Reply with the merged text only."
)
PRESERVATION_PROMPT = (
    "Score from 0 to 1 how much of the information in the source memories is preserved in the merged text. "
    "Reply with the number first."
)

_LABEL_PATTERN = re.compile(r"\b(compatible|contradictory|subsumes|subsumed)\b", re.IGNORECASE)
_NUMBER_PATTERN = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)")
_RETRYABLE_ERRORS = (OracleTimeoutError, OracleUnavailableError, OracleParseError)


@runtime_checkable
class ChatTransport(Protocol):
    """Sends one chat-completion request body and returns the response body."""

    async def send(self, request: JsonObject) -> JsonObject:
        ...  # noqa: WPS428


def fixture_key(request: JsonObject) -> str:
    """First 16 hex digits of the blake2b digest of the canonical JSON form of `request`."""
    canonical = json.dumps(request, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()


def parse_relation(reply: str) -> Relation:
    """
    Extracts the first relation label from a reply.

    Raises:
        OracleParseError: If no label is present.
    """
    match = _LABEL_PATTERN.search(reply)
    if match is None:
        raise OracleParseError(f"no relation label in reply: {reply[:80]!r}")
    return Relation(match.group(1).lower())


def parse_score(reply: str) -> float:
    """
    Extracts the first real number of a reply as a preservation score.

    Raises:
        OracleParseError: If there is no number or it lies outside [0, 1].
    """
    match = _NUMBER_PATTERN.search(reply)
    if match is None:
        raise OracleParseError(f"no score in reply: {reply[:80]!r}")
    score = float(match.group(0))
    if not 0 <= score <= 1:
        raise OracleParseError(f"score {score} outside [0, 1]")
    return score


def extract_content(body: JsonObject) -> str:
    """
    Text of the first choice of a chat-completion response.

    Raises:
        OracleParseError: If the body does not have the chat-completion shape.
    """
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as error:
        raise OracleParseError("response is not a chat completion") from error
    if not isinstance(content, str):
        raise OracleParseError("chat completion content is not text")
    return content


class AiohttpChatTransport:
    """Live transport: POSTs the body as JSON with a bearer key."""

    def __init__(
        self,
        url: str,
        api_key: str,
        timeout_seconds: float = 30.0,
        session: aiohttp.ClientSession | None = None,
    ) -> None:
        if not url:
            raise OracleUnavailableError("remote oracle needs an endpoint URL (FADEMEM_LLM_URL)")
        self._url = url
        self._api_key = api_key
        self._timeout = aiohttp.ClientTimeout(total=timeout_seconds)
        self._session = session

    async def send(self, request: JsonObject) -> JsonObject:
        try:
            if self._session is not None:
                return await self._post(self._session, request)
            async with aiohttp.ClientSession(timeout=self._timeout) as session:
                return await self._post(session, request)
        except TimeoutError as error:
            raise OracleTimeoutError(f"no answer from {self._url} within {self._timeout.total}s") from error
        except aiohttp.ClientError as error:
            raise OracleUnavailableError(f"request to {self._url} failed: {error}") from error

    async def _post(self, session: aiohttp.ClientSession, request: JsonObject) -> JsonObject:
        headers = {"Authorization": f"Bearer {self._api_key}"} if self._api_key else {}
        async with session.post(self._url, json=request, headers=headers, timeout=self._timeout) as response:
            if response.status in {401, 403}:
                raise OracleAuthError(f"endpoint rejected credentials (HTTP {response.status})")
            if response.status == 429 or response.status >= 500:
                raise OracleUnavailableError(f"endpoint answered HTTP {response.status}")
            if response.status >= 400:
                raise OracleError(f"endpoint answered HTTP {response.status}")
            body = await response.json(content_type=None)
        if not isinstance(body, dict):
            raise OracleParseError("response body is not a JSON object")
        return body


class FixtureReplayTransport:
    """Replays recorded exchanges; a request without a fixture is an unavailable oracle."""

    def __init__(self, fixture_dir: Path) -> None:
        self._fixture_dir = fixture_dir

    async def send(self, request: JsonObject) -> JsonObject:
        response_path = self._fixture_dir / f"{fixture_key(request)}.response.json"
        if not response_path.exists():
            raise OracleUnavailableError(f"no recorded response for request {fixture_key(request)}")
        async with aiofiles.open(response_path, encoding="utf-8") as response_file:
            body = json.loads(await response_file.read())
        if not isinstance(body, dict):
            raise OracleParseError(f"fixture {response_path.name} is not a JSON object")
        return body


class RecordingTransport:
    """Forwards to `inner` and writes each exchange as a fixture pair under `fixture_dir`."""

    def __init__(self, inner: ChatTransport, fixture_dir: Path) -> None:
        self._inner = inner
        self._fixture_dir = fixture_dir

    async def send(self, request: JsonObject) -> JsonObject:
        response = await self._inner.send(request)
        self._fixture_dir.mkdir(parents=True, exist_ok=True)
        key = fixture_key(request)
        for suffix, body in (("request", request), ("response", response)):
            async with aiofiles.open(self._fixture_dir / f"{key}.{suffix}.json", "w", encoding="utf-8") as fixture:
                await fixture.write(json.dumps(body, sort_keys=True, ensure_ascii=False, indent=2))
        return response


class RemoteOracle:
    """
    Chat-completion oracle with bounded concurrency and exponential-backoff retries.

    Timeouts, unavailable endpoints and unparseable replies are retried up to `max_retries`
    times; authentication failures surface immediately.
    """

    def __init__(
        self,
        transport: ChatTransport,
        model: str,
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
        max_in_flight: int = 4,
    ) -> None:
        self._transport = transport
        self._model = model
        self._max_retries = max_retries
        self._backoff_seconds = backoff_seconds
        self._semaphore = asyncio.Semaphore(max_in_flight)

    async def classify(self, text_a: str, text_b: str) -> RelationVerdict:
        user_message = f"Memory A (new): {text_a}\nMemory B (existing): {text_b}"
        relation, reply = await self._ask(CLASSIFY_PROMPT, user_message, parse_relation)
        return RelationVerdict(relation=relation, rationale=reply.strip() or None)

    async def merge(self, texts: Sequence[str]) -> str:
        if not texts:
            raise ValueError("cannot merge an empty list of texts")
        numbered = "\n".join(f"{index}. {text}" for index, text in enumerate(texts, start=1))
        merged, _ = await self._ask(MERGE_PROMPT, numbered, _non_empty)
        return merged

    async def preservation_score(self, sources: Sequence[str], merged: str) -> float:
        listed = "\n".join(f"- {text}" for text in sources)
        score, _ = await self._ask(PRESERVATION_PROMPT, f"Sources:\n{listed}\nMerged:\n{merged}", parse_score)
        return score

    def request_body(self, system_prompt: str, user_message: str) -> JsonObject:
        """Chat-completion request body sent for one call."""
        return {
            "model": self._model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_message},
            ],
        }

    async def _ask[T](self, system_prompt: str, user_message: str, parse: Callable[[str], T]) -> tuple[T, str]:
        request = self.request_body(system_prompt, user_message)
        attempt = 0
        while True:
            try:
                async with self._semaphore:
                    reply = extract_content(await self._transport.send(request))
                return parse(reply), reply
            except _RETRYABLE_ERRORS as error:
                if attempt >= self._max_retries:
                    raise
                delay = self._backoff_seconds * 2 ** attempt
                logger.warning("Oracle call failed (%s), retry %d in %.2fs", error, attempt + 1, delay)
                attempt += 1
                await asyncio.sleep(delay)


def _non_empty(reply: str) -> str:
    merged = reply.strip()
    if not merged:
        raise OracleParseError("merge reply is empty")
    return merged


def build_remote_oracle(settings: RemoteSettings) -> RemoteOracle:
    """
    Live oracle configured from the environment.

    Raises:
        OracleUnavailableError: If FADEMEM_LLM_URL is not set.
    """
    transport = AiohttpChatTransport(settings.llm_url, settings.llm_key, settings.timeout_seconds)
    return RemoteOracle(
        transport,
        model=settings.llm_model,
        max_retries=settings.max_retries,
        backoff_seconds=settings.backoff_seconds,
        max_in_flight=settings.max_in_flight,
    )
