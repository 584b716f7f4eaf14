"""End-to-end routing gateway: chat backends, router, accounting and HTTP service."""

from __future__ import annotations

from .client import (
    ChatClient,
    ChatError,
    ChatGenerator,
    ChatResult,
    HTTPStatusError,
    HttpChatClient,
    MalformedJSONError,
    MissingFieldError,
    MockChatClient,
    RawResponse,
    TransportError,
    chat_complete,
    completion_body,
    count_words,
)
from .metrics import CostReport, EvaluationError, MetricsAccumulator, evaluate_run, load_dataset, summarize
from .mock import ScriptedBackends, load_script, mock_clients
from .router import FALLBACK_LEVEL, CallRecord, GatewayClients, RouteTrace, route_query
from .service import GatewayServer, make_server

__all__ = [
    "FALLBACK_LEVEL", "CallRecord", "ChatClient", "ChatError", "ChatGenerator", "ChatResult",
    "CostReport", "EvaluationError", "GatewayClients", "GatewayServer", "HTTPStatusError",
    "HttpChatClient", "MalformedJSONError", "MetricsAccumulator", "MissingFieldError",
    "MockChatClient", "RawResponse", "RouteTrace", "ScriptedBackends", "TransportError",
    "chat_complete", "completion_body", "count_words", "evaluate_run", "load_dataset",
    "load_script", "make_server", "mock_clients", "route_query", "summarize",
]
