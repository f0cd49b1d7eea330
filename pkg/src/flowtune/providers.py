"""Chat and embedding providers: HTTP endpoints plus offline test doubles.

HTTP providers speak the common chat-completions / embeddings JSON shape.
Secrets come only from environment variables. The scripted providers map a
hash of the exact request to a canned response, which keeps offline runs
bit-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .embedding import DEFAULT_FALLBACK_DIM, local_fallback_embed
from .errors import FlowtuneError, TransportError

CHAT_API_KEY_ENV = "CHAT_API_KEY"
CHAT_BASE_URL_ENV = "CHAT_BASE_URL"
EMBED_API_KEY_ENV = "EMBED_API_KEY"
EMBED_BASE_URL_ENV = "EMBED_BASE_URL"

DEFAULT_TIMEOUT_SECONDS = 120.0
DEFAULT_TRANSPORT_RETRIES = 2


class MockScriptError(FlowtuneError):
    """A scripted provider was asked for a request it has no response for."""


def script_key_for_messages(messages: list[dict[str, str]]) -> str:
    blob = json.dumps(messages, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def script_key_for_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _post_json(
    url: str,
    payload: dict,
    api_key: str | None,
    timeout: float,
    retries: int,
) -> dict:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    last_error: Exception | None = None
    for _ in range(retries + 1):
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.RequestException as e:
            last_error = e
            continue
        if resp.status_code != 200:
            last_error = TransportError(
                f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
            # Client errors will not improve on retry.
            if 400 <= resp.status_code < 500:
                raise last_error
            continue
        try:
            return resp.json()
        except ValueError as e:
            last_error = e
            continue
    raise TransportError(f"request to {url} failed: {last_error}") from (
        last_error if isinstance(last_error, Exception) else None
    )


@dataclass
class HttpChatProvider:
    """OpenAI-style chat-completions endpoint."""

    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = DEFAULT_TIMEOUT_SECONDS
    max_retries: int = DEFAULT_TRANSPORT_RETRIES
    temperature: float = 0.0  # pinned for reproducible database builds

    @classmethod
    def from_env(cls, model: str, **kwargs) -> "HttpChatProvider":
        base_url = os.environ.get(CHAT_BASE_URL_ENV)
        if not base_url:
            raise TransportError(f"{CHAT_BASE_URL_ENV} is not set")
        return cls(
            base_url=base_url,
            model=model,
            api_key=os.environ.get(CHAT_API_KEY_ENV),
            **kwargs,
        )

    def chat(self, messages: list[dict[str, str]]) -> str:
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        }
        doc = _post_json(
            self.base_url.rstrip("/") + "/chat/completions",
            payload,
            self.api_key,
            self.timeout,
            self.max_retries,
        )
        try:
            content = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed chat response: {e!r}") from e
        if not isinstance(content, str):
            raise TransportError("chat response content is not text")
        return content

    def fingerprint(self) -> str:
        return f"http-chat:{self.base_url}:{self.model}"


@dataclass
class HttpEmbeddingProvider:
    """OpenAI-style embeddings endpoint."""

    base_url: str
    model: str
    api_key: str | None = None
    timeout: float = DEFAULT_TIMEOUT_SECONDS
    max_retries: int = DEFAULT_TRANSPORT_RETRIES

    @classmethod
    def from_env(cls, model: str, **kwargs) -> "HttpEmbeddingProvider":
        base_url = os.environ.get(EMBED_BASE_URL_ENV)
        if not base_url:
            raise TransportError(f"{EMBED_BASE_URL_ENV} is not set")
        return cls(
            base_url=base_url,
            model=model,
            api_key=os.environ.get(EMBED_API_KEY_ENV),
            **kwargs,
        )

    def embed(self, text: str) -> Sequence[float]:
        payload = {"model": self.model, "input": [text]}
        doc = _post_json(
            self.base_url.rstrip("/") + "/embeddings",
            payload,
            self.api_key,
            self.timeout,
            self.max_retries,
        )
        try:
            values = doc["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed embedding response: {e!r}") from e
        return [float(v) for v in values]

    def fingerprint(self) -> str:
        return f"http-embed:{self.base_url}:{self.model}"


@dataclass
class LocalFallbackEmbeddingProvider:
    """Offline deterministic embedding (hashed bag-of-words)."""

    dim: int = DEFAULT_FALLBACK_DIM

    def embed(self, text: str) -> Sequence[float]:
        return local_fallback_embed(text, self.dim).values

    def fingerprint(self) -> str:
        return f"local-fallback:{self.dim}"


@dataclass
class ScriptedChatProvider:
    """File- or dict-backed chat mock: sha256(request) -> response text."""

    responses: dict[str, str]
    source: str = "<memory>"
    requests_seen: list[list[dict[str, str]]] = field(default_factory=list)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedChatProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise MockScriptError(f"{path}: chat script must be a JSON object")
        return cls(responses={str(k): str(v) for k, v in doc.items()}, source=str(path))

    def chat(self, messages: list[dict[str, str]]) -> str:
        self.requests_seen.append([dict(m) for m in messages])
        key = script_key_for_messages(messages)
        if key not in self.responses:
            raise MockScriptError(
                f"chat script {self.source} has no response for request {key}"
            )
        return self.responses[key]

    def fingerprint(self) -> str:
        digest = hashlib.sha256(
            json.dumps(self.responses, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]
        return f"scripted-chat:{digest}"


@dataclass
class SequenceChatProvider:
    """Chat mock that replays a fixed response sequence.

    Useful when the request content is irrelevant (e.g. retry-path tests).
    Raising past the end of the sequence keeps silent loops out of tests.
    Entries may be exceptions, which are raised instead of returned.
    """

    responses: list[str | Exception]
    requests_seen: list[list[dict[str, str]]] = field(default_factory=list)
    _cursor: int = 0

    def chat(self, messages: list[dict[str, str]]) -> str:
        self.requests_seen.append([dict(m) for m in messages])
        if self._cursor >= len(self.responses):
            raise MockScriptError(
                f"sequence chat mock exhausted after {len(self.responses)} responses"
            )
        item = self.responses[self._cursor]
        self._cursor += 1
        if isinstance(item, Exception):
            raise item
        return item

    def fingerprint(self) -> str:
        return f"sequence-chat:{len(self.responses)}"


@dataclass
class ScriptedEmbeddingProvider:
    """Dict- or file-backed embedding mock: sha256(text) -> vector."""

    vectors: dict[str, tuple[float, ...]]
    source: str = "<memory>"

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedEmbeddingProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise MockScriptError(f"{path}: embedding script must be a JSON object")
        vectors = {
            str(k): tuple(float(x) for x in v) for k, v in doc.items()
        }
        return cls(vectors=vectors, source=str(path))

    @classmethod
    def from_texts(cls, mapping: dict[str, Sequence[float]]) -> "ScriptedEmbeddingProvider":
        """Convenience: key by plain text instead of hashes."""
        return cls(
            vectors={
                script_key_for_text(t): tuple(float(x) for x in v)
                for t, v in mapping.items()
            }
        )

    def embed(self, text: str) -> Sequence[float]:
        key = script_key_for_text(text)
        if key not in self.vectors:
            raise MockScriptError(
                f"embedding script {self.source} has no vector for text {key}"
            )
        return list(self.vectors[key])

    def fingerprint(self) -> str:
        digest = hashlib.sha256(
            json.dumps(
                {k: list(v) for k, v in self.vectors.items()}, sort_keys=True
            ).encode("utf-8")
        ).hexdigest()[:16]
        return f"scripted-embed:{digest}"
