"""OpenAI-compatible chat-completions client with an injectable transport."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Protocol, Sequence

from ..core import BackendProfile
from ..cotool import Generation, StopReason
from ..tagparse import BEGIN_TOOL_QUERY, END_TOOL_QUERY


class ChatError(RuntimeError):
    kind = "backend_error"


class TransportError(ChatError):
    kind = "transport"


class HTTPStatusError(TransportError):
    kind = "http_status"

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"backend returned HTTP {status}{': ' + detail if detail else ''}")
        self.status = status


class MalformedJSONError(ChatError):
    kind = "malformed_json"


class MissingFieldError(ChatError):
    kind = "missing_field"


@dataclass(frozen=True)
class RawResponse:
    status: int
    body: bytes
    elapsed: float | None = None  # lets mocks report a fixed latency


class ChatClient(Protocol):
    def post(self, url: str, body: Mapping[str, Any], headers: Mapping[str, str], timeout: float) -> RawResponse: ...


class HttpChatClient:
    """urllib-based client; stateless, so safe to share between threads."""

    def post(self, url: str, body: Mapping[str, Any], headers: Mapping[str, str], timeout: float) -> RawResponse:
        data = json.dumps(body).encode("utf-8")
        req = urllib.request.Request(url, data=data, method="POST",
                                     headers={"Content-Type": "application/json", **headers})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return RawResponse(resp.status, resp.read())
        except urllib.error.HTTPError as exc:
            return RawResponse(exc.code, exc.read() or b"")
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportError(f"request to {url} failed: {exc}") from exc


@dataclass(frozen=True)
class ChatResult:
    text: str
    latency: float
    words: int
    finish_reason: str | None = None


def count_words(text: str) -> int:
    return len(text.split())


def _headers(backend: BackendProfile) -> dict[str, str]:
    if backend.api_key_env:
        key = os.environ.get(backend.api_key_env)
        if key:
            return {"Authorization": f"Bearer {key}"}
    return {}


def chat_complete(backend: BackendProfile, messages: Sequence[tuple[str, str] | Mapping[str, str]],
                  client: ChatClient, *, max_tokens: int | None = None,
                  stop: Sequence[str] = ()) -> ChatResult:
    """One chat completion; returns the first choice's content with latency and word count."""
    msgs = [m if isinstance(m, Mapping) else {"role": m[0], "content": m[1]} for m in messages]
    body: dict[str, Any] = {"model": backend.model_name, "messages": msgs,
                            "max_tokens": min(max_tokens or backend.max_tokens, backend.max_tokens)}
    if stop:
        body["stop"] = list(stop)
    start = time.perf_counter()
    raw = client.post(backend.endpoint_url, body, _headers(backend), backend.timeout)
    latency = raw.elapsed if raw.elapsed is not None else time.perf_counter() - start
    if not 200 <= raw.status < 300:
        raise HTTPStatusError(raw.status, raw.body[:200].decode("utf-8", "replace"))
    try:
        data = json.loads(raw.body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJSONError(f"backend response is not JSON: {exc}") from None
    try:
        choice = data["choices"][0]
        content = choice["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise MissingFieldError("backend response lacks choices[0].message.content") from None
    content = "" if content is None else str(content)
    finish = choice.get("finish_reason") if isinstance(choice, Mapping) else None
    return ChatResult(content, latency, count_words(content), finish)


def completion_body(content: str, model: str = "mock", finish_reason: str = "stop") -> bytes:
    return json.dumps({
        "object": "chat.completion", "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content},
                     "finish_reason": finish_reason}],
    }).encode("utf-8")


class MockChatClient:
    """Answers from ``handler(body)``, which returns reply text or a ``RawResponse``."""

    def __init__(self, handler: Callable[[dict], "str | RawResponse"], latency: float = 0.0):
        self.handler = handler
        self.latency = latency
        self.requests: list[dict] = []

    def post(self, url: str, body: Mapping[str, Any], headers: Mapping[str, str], timeout: float) -> RawResponse:
        self.requests.append(dict(body))
        out = self.handler(dict(body))
        if isinstance(out, RawResponse):
            return out
        return RawResponse(200, completion_body(out, str(body.get("model", "mock"))), self.latency)


class ChatGenerator:
    """Adapts a chat backend to the generator contract used by the tool loop.

    Servers drop the stop string from the content, so a reply that stopped
    with an unclosed tool query gets the end marker re-attached.
    """

    def __init__(self, client: ChatClient, backend: BackendProfile, system: str | None = None):
        self.client = client
        self.backend = backend
        self.system = system

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation:
        messages = ([("system", self.system)] if self.system else []) + [("user", prompt)]
        res = chat_complete(self.backend, messages, self.client, max_tokens=max_tokens, stop=stop)
        text = res.text
        if res.finish_reason == "length":
            return Generation(text, StopReason.LENGTH_CAP)
        if END_TOOL_QUERY in stop:
            if text.endswith(END_TOOL_QUERY):
                return Generation(text, StopReason.STOP_MARKER)
            if text.count(BEGIN_TOOL_QUERY) > text.count(END_TOOL_QUERY):
                return Generation(text + END_TOOL_QUERY, StopReason.STOP_MARKER)
        return Generation(text, StopReason.END_OF_SEQUENCE)
