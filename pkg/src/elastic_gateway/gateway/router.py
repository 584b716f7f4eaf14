"""Per-query routing: classify with the agent backend, then answer at the chosen level."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..core import ComplexityLevel, GatewayConfig, Query, RoutingAction, action_to_level, level_to_action
from ..cotool import CoToolInstructions, CoToolLimits, Dispatcher, Generation, Generator, SequenceStatus, run_batch
from ..prompts import ANSWER_INSTRUCTION, SYSTEM_PROMPT
from ..rstkit import default_registry, make_dispatcher
from ..tagparse import END_TOOL_RESULT, LevelTagParse, extract_boxed_answer, parse_level_tag
from .client import ChatClient, ChatError, ChatGenerator, ChatResult, HttpChatClient, chat_complete, count_words

logger = logging.getLogger(__name__)

FALLBACK_LEVEL = ComplexityLevel.L2


@dataclass(frozen=True)
class CallRecord:
    backend: str
    level: int
    latency: float
    words: int
    params_b: float = 0.0


@dataclass
class RouteTrace:
    query_id: str
    parsed: LevelTagParse | None = None
    action: RoutingAction | None = None
    answer: str = ""
    per_call: list[CallRecord] = field(default_factory=list)
    tool_calls: int = 0
    notes: list[str] = field(default_factory=list)
    failed: bool = False
    diagnostic: str | None = None

    @property
    def level(self) -> ComplexityLevel | None:
        return None if self.action is None else action_to_level(self.action)

    @property
    def fallback(self) -> bool:
        return "fallback" in self.notes

    @property
    def total_latency(self) -> float:
        return sum(c.latency for c in self.per_call)

    @property
    def total_words(self) -> int:
        return sum(c.words for c in self.per_call)

    def to_dict(self) -> dict[str, Any]:
        p = self.parsed
        return {
            "query_id": self.query_id,
            "parsed": None if p is None else {
                "level": None if p.level is None else p.level.name, "inline_answer": p.inline_answer,
                "well_formed": p.well_formed, "tag_count": p.tag_count},
            "action": None if self.action is None else self.action.value,
            "level": None if self.level is None else self.level.name,
            "answer": self.answer,
            "per_call": [{"backend": c.backend, "level": f"L{c.level}", "latency": c.latency,
                          "words": c.words, "params_b": c.params_b} for c in self.per_call],
            "tool_calls": self.tool_calls,
            "notes": list(self.notes),
            "failed": self.failed,
            "diagnostic": self.diagnostic,
        }


@dataclass
class GatewayClients:
    """Everything the router talks to; swap in mocks for offline runs."""

    chat: ChatClient = field(default_factory=HttpChatClient)
    cotool_generator: Generator | None = None  # defaults to the L4 chat backend
    dispatcher: Dispatcher | None = None  # defaults to the built-in tool registry

    def dispatch(self) -> Dispatcher:
        if self.dispatcher is None:
            self.dispatcher = make_dispatcher(default_registry())
        return self.dispatcher


class _RecordingGenerator:
    """Logs one CallRecord per generation made by the tool loop."""

    def __init__(self, inner: Generator, trace: RouteTrace, backend_name: str, params_b: float):
        self.inner = inner
        self.trace = trace
        self.backend_name = backend_name
        self.params_b = params_b

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation:
        start = time.perf_counter()
        gen = self.inner.generate(prompt, stop, max_tokens)
        self.trace.per_call.append(CallRecord(self.backend_name, 4, time.perf_counter() - start,
                                              count_words(gen.text), self.params_b))
        return gen


def _call(config: GatewayConfig, level: ComplexityLevel, messages, clients: GatewayClients,
          trace: RouteTrace, retries: int = 1) -> ChatResult:
    backend = config.backends[level]
    last: ChatError | None = None
    for attempt in range(retries + 1):
        try:
            res = chat_complete(backend, messages, clients.chat)
        except ChatError as exc:
            last = exc
            trace.notes.append(f"{backend.model_name} attempt {attempt + 1} failed: {exc.kind}")
            continue
        trace.per_call.append(CallRecord(backend.model_name, int(level), res.latency, res.words, backend.params_b))
        return res
    assert last is not None
    raise last


def final_answer(text: str) -> str:
    boxed = extract_boxed_answer(text)
    return boxed.strip() if boxed is not None else text.strip()


def answer_messages(q: Query) -> list[tuple[str, str]]:
    return [("user", f"{q.text}\n\n{ANSWER_INSTRUCTION}")]


def route_query(q: Query, config: GatewayConfig, clients: GatewayClients) -> RouteTrace:
    trace = RouteTrace(query_id=q.id)
    try:
        reply = _call(config, ComplexityLevel.L1, [("system", SYSTEM_PROMPT), ("user", q.text)], clients, trace)
    except ChatError as exc:
        trace.failed, trace.diagnostic = True, f"agent backend failed: {exc}"
        return trace
    parsed = parse_level_tag(reply.text)
    trace.parsed = parsed
    if parsed.well_formed and parsed.level is not None:
        level = parsed.level
    else:
        level = FALLBACK_LEVEL
        trace.notes.append("fallback")
    trace.action = level_to_action(level)

    try:
        if level is ComplexityLevel.L1:
            trace.answer = parsed.inline_answer or ""
        elif level in (ComplexityLevel.L2, ComplexityLevel.L3):
            res = _call(config, level, answer_messages(q), clients, trace)
            trace.answer = final_answer(res.text)
        else:
            _delegate(q, config, clients, trace)
    except ChatError as exc:
        trace.failed, trace.diagnostic = True, f"{level.name} backend failed: {exc}"
    return trace


def _delegate(q: Query, config: GatewayConfig, clients: GatewayClients, trace: RouteTrace) -> None:
    backend = config.backends[ComplexityLevel.L4]
    inner = clients.cotool_generator or ChatGenerator(clients.chat, backend)
    gen = _RecordingGenerator(inner, trace, backend.model_name, backend.params_b)
    limits = CoToolLimits(config.max_tool_calls, config.max_turn)
    (seq,) = run_batch(gen, clients.dispatch(), [q], CoToolInstructions.default(limits), limits,
                       max_tokens=backend.max_tokens)
    trace.tool_calls = seq.tool_calls
    trace.answer = final_answer(seq.generated.rsplit(END_TOOL_RESULT, 1)[-1])
    if seq.status is not SequenceStatus.FINISHED:
        trace.failed = True
        trace.diagnostic = f"tool loop aborted: {seq.diagnostic}"
