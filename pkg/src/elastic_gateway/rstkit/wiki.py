"""MediaWiki action-API client behind an injectable transport."""

from __future__ import annotations

import json
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path
from typing import Any, Mapping, Protocol

DEFAULT_CONTENT_CAP = 20_000
TRUNCATION_MARKER = "\n[... truncated ...]"
USER_AGENT = "elastic-gateway/0.1 (tool-augmented reasoning research client)"


class WikiError(RuntimeError):
    pass


class TransportError(WikiError):
    pass


class PageNotFound(WikiError):
    pass


class Transport(Protocol):
    def get(self, params: Mapping[str, Any], lang: str) -> dict: ...


def canonical_request(params: Mapping[str, Any], lang: str) -> str:
    """Stable key for a request: language plus sorted, stringified parameters."""
    flat = {str(k): str(v) for k, v in params.items()}
    return json.dumps({"lang": lang, "params": dict(sorted(flat.items()))}, sort_keys=True)


class HttpTransport:
    """Live GET against ``https://{lang}.wikipedia.org/w/api.php``, at most one request per interval."""

    def __init__(self, base_url: str = "https://{lang}.wikipedia.org/w/api.php",
                 timeout: float = 10.0, min_interval: float = 0.1):
        self.base_url = base_url
        self.timeout = timeout
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def get(self, params: Mapping[str, Any], lang: str) -> dict:
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()
        query = urllib.parse.urlencode({k: str(v) for k, v in params.items()})
        url = self.base_url.format(lang=lang) + "?" + query
        req = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read()
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise TransportError(f"wiki request failed: {exc}") from exc
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise TransportError("wiki response is not JSON") from exc


class FixtureTransport:
    """Replays recorded ``[{"request": ..., "response": ...}]`` pairs."""

    def __init__(self, pairs: list[dict]):
        self._responses = {}
        for pair in pairs:
            req = pair["request"]
            self._responses[canonical_request(req["params"], req["lang"])] = pair["response"]

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureTransport":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def get(self, params: Mapping[str, Any], lang: str) -> dict:
        key = canonical_request(params, lang)
        try:
            return json.loads(json.dumps(self._responses[key]))
        except KeyError:
            raise TransportError(f"no recorded response for {key}") from None


class RecordingTransport:
    """Wraps a live transport and writes every exchange as a fixture file."""

    def __init__(self, inner: Transport, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.pairs: list[dict] = []

    def get(self, params: Mapping[str, Any], lang: str) -> dict:
        response = self.inner.get(params, lang)
        self.pairs.append({"request": {"lang": lang, "params": {k: str(v) for k, v in params.items()}},
                           "response": response})
        self.path.write_text(json.dumps(self.pairs, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return response


def _page_selector(title_or_id: str | int) -> dict[str, str]:
    if isinstance(title_or_id, int) or (isinstance(title_or_id, str) and title_or_id.isdigit()):
        return {"pageids": str(title_or_id)}
    title = str(title_or_id).strip()
    if not title:
        raise ValueError("page title must be non-empty")
    # MediaWiki treats the first letter of a title case-insensitively.
    return {"titles": title[0].upper() + title[1:]}


def _check_error(data: dict) -> None:
    if "error" in data:
        err = data["error"]
        raise WikiError(f"wiki API error {err.get('code', '?')}: {err.get('info', '')}")


def wiki_search(query: str, k: int = 5, lang: str = "en",
                transport: Transport | None = None) -> list[tuple[str, int]]:
    if not query or not query.strip():
        raise ValueError("search query must be non-empty")
    if k < 1:
        raise ValueError("k must be positive")
    transport = transport or HttpTransport()
    params = {"action": "query", "list": "search", "srsearch": query.strip(), "srlimit": k,
              "format": "json", "formatversion": 2}
    data = transport.get(params, lang)
    _check_error(data)
    hits = data.get("query", {}).get("search", [])
    return [(h["title"], int(h["pageid"])) for h in hits[:k]]


def _extract(title_or_id, lang, transport, intro: bool) -> str:
    transport = transport or HttpTransport()
    params = {"action": "query", "prop": "extracts", "explaintext": 1, "redirects": 1,
              "format": "json", "formatversion": 2, **_page_selector(title_or_id)}
    if intro:
        params["exintro"] = 1
    data = transport.get(params, lang)
    _check_error(data)
    pages = data.get("query", {}).get("pages", [])
    if not pages or pages[0].get("missing") or pages[0].get("invalid") or "extract" not in pages[0]:
        raise PageNotFound(f"no wiki page for {title_or_id!r}")
    return pages[0]["extract"]


def wiki_get_summary(title_or_id: str | int, lang: str = "en", transport: Transport | None = None) -> str:
    return _extract(title_or_id, lang, transport, intro=True)


def wiki_get_content(title_or_id: str | int, lang: str = "en", transport: Transport | None = None,
                     cap_bytes: int = DEFAULT_CONTENT_CAP) -> str:
    text = _extract(title_or_id, lang, transport, intro=False)
    raw = text.encode("utf-8")
    if len(raw) <= cap_bytes:
        return text
    return raw[:cap_bytes].decode("utf-8", errors="ignore") + TRUNCATION_MARKER
