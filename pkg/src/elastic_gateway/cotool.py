"""Interleaved reasoning / tool-call execution engine.

Each unfinished sequence is generated until end-of-sequence or a tool-query
end marker. A paused sequence has its query extracted and dispatched to a
tool, the raw tool output is digested by a reason-in-tool generation, and the
digest is appended inside tool-result markers before generation resumes.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Mapping, Protocol, Sequence

from .core import Query
from .prompts import TASK_INSTRUCTION, cotool_instruction, render
from .rstkit.registry import ToolOutcome, format_tool_result
from .tagparse import (
    BEGIN_TOOL_QUERY,
    BEGIN_TOOL_RESULT,
    END_TOOL_QUERY,
    END_TOOL_RESULT,
    MalformedSequenceError,
    extract_tool_query,
)

logger = logging.getLogger(__name__)

LIMIT_MESSAGE = "reaching max tool call limitations, you cannot use tools anymore"


class StopReason(enum.Enum):
    END_OF_SEQUENCE = "EndOfSequence"
    STOP_MARKER = "StopMarker"
    LENGTH_CAP = "LengthCap"


@dataclass(frozen=True)
class Generation:
    text: str
    stop_reason: StopReason


class Generator(Protocol):
    """Text continuation of ``prompt``.

    When a stop marker ends generation the continuation includes the marker
    and ``stop_reason`` is STOP_MARKER.
    """

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation: ...


class SequenceStatus(enum.Enum):
    UNFINISHED = "Unfinished"
    FINISHED = "Finished"
    ABORTED = "Aborted"


@dataclass
class SequenceState:
    id: str
    prompt: str
    text: str
    status: SequenceStatus = SequenceStatus.UNFINISHED
    tool_calls: int = 0  # result blocks appended, limit messages included
    executed_calls: int = 0  # calls actually sent to the dispatcher
    turns: int = 0
    diagnostic: str | None = None

    @property
    def generated(self) -> str:
        return self.text[len(self.prompt):]


@dataclass(frozen=True)
class CoToolLimits:
    max_tool_calls: int = 4
    max_turn: int = 8

    def __post_init__(self) -> None:
        if self.max_tool_calls < 0:
            raise ValueError("max_tool_calls must be >= 0")
        if self.max_turn < 1:
            raise ValueError("max_turn must be >= 1")


@dataclass(frozen=True)
class CoToolInstructions:
    task: str
    reason_in_tool: str = TASK_INSTRUCTION

    @classmethod
    def default(cls, limits: CoToolLimits | None = None) -> "CoToolInstructions":
        limits = limits or CoToolLimits()
        return cls(cotool_instruction(limits.max_tool_calls), TASK_INSTRUCTION)


Dispatcher = Callable[[str], str]
TraceSink = Callable[[dict], None]

_REASON_FIELDS = ("{tool_query}", "{prev_reasoning}", "{tool_output}")


def build_reason_input(reason_instruction: str, tool_query: str, sequence_text: str, tool_output: str) -> str:
    """Reason-in-tool prompt; a template without placeholders is concatenated with the three inputs."""
    if any(f in reason_instruction for f in _REASON_FIELDS):
        return render(reason_instruction, tool_query=tool_query, prev_reasoning=sequence_text,
                      tool_output=tool_output)
    return reason_instruction + tool_query + sequence_text + tool_output


def wrap_tool_result(text: str) -> str:
    return BEGIN_TOOL_RESULT + text + END_TOOL_RESULT


def reason_in_tool(generator: Generator, reason_input: str, max_tokens: int | None = None) -> str:
    return generator.generate(reason_input, (), max_tokens).text


class _Tracer:
    def __init__(self, sink: TraceSink | None):
        self.sink = sink

    def emit(self, event: str, seq: SequenceState, duration: float = 0.0, **extra) -> None:
        if self.sink is None:
            return
        record = {"event": event, "sequence_id": seq.id,
                  "byte_offset": len(seq.text.encode("utf-8")), "duration_s": duration}
        record.update(extra)
        self.sink(record)


class JsonlTraceSink:
    """Writes one JSON object per line; safe to share between worker threads."""

    def __init__(self, stream: IO[str]):
        self.stream = stream
        self._lock = threading.Lock()

    def __call__(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            self.stream.write(line + "\n")
            self.stream.flush()


def _abort(seq: SequenceState, why: str, tracer: _Tracer) -> SequenceState:
    seq.status = SequenceStatus.ABORTED
    seq.diagnostic = why
    tracer.emit("abort", seq, reason=why)
    return seq


def handle_tool_query(seq: SequenceState, dispatcher: Dispatcher, generator: Generator,
                      reason_instruction: str, limits: CoToolLimits, *,
                      max_tokens: int | None = None, trace: TraceSink | None = None) -> SequenceState:
    """Resolve the tool query that ends ``seq.text`` and append one result block."""
    tracer = _Tracer(trace)
    try:
        tool_query = extract_tool_query(seq.generated)
    except MalformedSequenceError as exc:
        return _abort(seq, f"malformed tool query: {exc}", tracer)
    tracer.emit("tool_query", seq, query=tool_query)

    start = time.perf_counter()
    if seq.executed_calls >= limits.max_tool_calls:
        result = LIMIT_MESSAGE
    else:
        seq.executed_calls += 1
        try:
            tool_output = dispatcher(tool_query)
        except Exception as exc:  # surfaced to the model as a status: error result
            tool_output = format_tool_result(ToolOutcome.error("dispatcher", f"{type(exc).__name__}: {exc}"))
        reason_input = build_reason_input(reason_instruction, tool_query, seq.text, tool_output)
        try:
            result = reason_in_tool(generator, reason_input, max_tokens)
        except Exception as exc:
            return _abort(seq, f"reason-in-tool generation failed: {type(exc).__name__}: {exc}", tracer)
    seq.text += wrap_tool_result(result)
    seq.tool_calls += 1
    tracer.emit("tool_result", seq, time.perf_counter() - start, limited=result == LIMIT_MESSAGE)
    return seq


def _generate_step(seq: SequenceState, generator: Generator, limits: CoToolLimits,
                   max_tokens: int | None, tracer: _Tracer) -> bool:
    """One turn of main generation; returns True when the sequence paused on a tool query."""
    if seq.turns >= limits.max_turn:
        _abort(seq, "max turns reached", tracer)
        return False
    seq.turns += 1
    start = time.perf_counter()
    try:
        gen = generator.generate(seq.text, (END_TOOL_QUERY,), max_tokens)
    except Exception as exc:
        _abort(seq, f"generation failed: {type(exc).__name__}: {exc}", tracer)
        return False
    seq.text += gen.text
    tracer.emit("generate", seq, time.perf_counter() - start, stop_reason=gen.stop_reason.value)
    if gen.stop_reason is StopReason.END_OF_SEQUENCE:
        seq.status = SequenceStatus.FINISHED
        tracer.emit("finish", seq)
        return False
    if gen.stop_reason is StopReason.STOP_MARKER and not seq.text.endswith(END_TOOL_QUERY):
        seq.text += END_TOOL_QUERY
    return seq.text.endswith(END_TOOL_QUERY)


def run_batch(generator: Generator, dispatcher: Dispatcher, questions: Sequence[Query | str],
              instructions: CoToolInstructions | None = None, limits: CoToolLimits | None = None, *,
              reason_generator: Generator | None = None, max_tokens: int | None = None,
              order: Sequence[int] | None = None, workers: int | None = None,
              trace: TraceSink | None = None) -> list[SequenceState]:
    """Run the interleaved loop over a batch of questions.

    Results follow input order. ``order`` fixes the internal processing order
    (a permutation of input indices); ``workers`` > 1 processes sequences of a
    round concurrently. With a deterministic generator and dispatcher neither
    changes the output.
    """
    limits = limits or CoToolLimits()
    instructions = instructions or CoToolInstructions.default(limits)
    if not instructions.task or not instructions.reason_in_tool:
        raise ValueError("task and reason-in-tool instructions must be non-empty")
    reasoner = reason_generator or generator
    tracer = _Tracer(trace)

    states = []
    for i, q in enumerate(questions):
        qid, text = (q.id, q.text) if isinstance(q, Query) else (str(i), q)
        prompt = instructions.task + text
        states.append(SequenceState(id=qid, prompt=prompt, text=prompt))
    schedule = list(order) if order is not None else list(range(len(states)))
    if sorted(schedule) != list(range(len(states))):
        raise ValueError("order must be a permutation of the question indices")

    pool = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None

    def each(fn, indices):
        if pool is None:
            return [fn(i) for i in indices]
        return list(pool.map(fn, indices))

    try:
        active = [i for i in schedule if states[i].status is SequenceStatus.UNFINISHED]
        while active:
            paused = each(lambda i: _generate_step(states[i], generator, limits, max_tokens, tracer), active)
            tool_round = [i for i, p in zip(active, paused) if p]
            each(lambda i: handle_tool_query(states[i], dispatcher, reasoner, instructions.reason_in_tool,
                                             limits, max_tokens=max_tokens, trace=trace), tool_round)
            active = [i for i in schedule if states[i].status is SequenceStatus.UNFINISHED]
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return states


# --- offline generators ---------------------------------------------------

ECHO_TOOL_OUTPUT = object()
TOOL_OUTPUT_SENTINEL = "- Formatted Tool Output:\n"
PREV_REASONING_SENTINEL = "- Previous Reasoning Steps:\n"
CURRENT_QUERY_SENTINEL = "- Current Tool Query/Task Executed:\n"


def _tail_after(prompt: str, sentinel: str) -> str:
    pos = prompt.rfind(sentinel)
    return prompt if pos < 0 else prompt[pos + len(sentinel):]


class EchoGenerator:
    """Returns the prompt tail after the formatted-tool-output heading (or the whole prompt)."""

    def __init__(self, sentinel: str = TOOL_OUTPUT_SENTINEL):
        self.sentinel = sentinel

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation:
        return Generation(_tail_after(prompt, self.sentinel), StopReason.END_OF_SEQUENCE)


@dataclass(frozen=True)
class Script:
    """Main-generation steps and reason-in-tool replies for one question.

    A step ending in the tool-query end marker pauses for a tool call; any
    other step ends the sequence. An ``analyses`` entry of ``ECHO_TOOL_OUTPUT``
    replays the formatted tool output.
    """

    steps: tuple[str, ...]
    analyses: tuple = ()


@dataclass
class ScriptedGenerator:
    """Deterministic, stateless generator keyed on question text found in the prompt.

    The step index is the number of tool-result blocks already present after
    the question, so the reply depends only on the prompt.
    """

    scripts: Mapping[str, Script]
    calls: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def _find(self, prompt: str, start: int = 0, end: int | None = None) -> tuple[Script, int]:
        end = len(prompt) if end is None else end
        best = None
        for key, script in self.scripts.items():
            pos = prompt.find(key, start, end)
            if pos >= 0 and (best is None or len(key) > len(best[0])):
                best = (key, script, pos)
        if best is None:
            raise LookupError("no script matches this prompt")
        key, script, pos = best
        return script, prompt.count(END_TOOL_RESULT, pos + len(key), end)

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation:
        with self._lock:
            self.calls += 1
        if END_TOOL_QUERY in stop:
            script, k = self._find(prompt)
            if k >= len(script.steps):
                raise LookupError(f"script exhausted at step {k}")
            text = script.steps[k]
            reason = StopReason.STOP_MARKER if text.endswith(END_TOOL_QUERY) else StopReason.END_OF_SEQUENCE
            return Generation(text, reason)
        # The tool query may repeat the question ahead of the earlier reasoning, so search only that block.
        start = prompt.find(PREV_REASONING_SENTINEL)
        end = prompt.rfind(CURRENT_QUERY_SENTINEL)
        script, k = self._find(prompt, max(start, 0), end if end > start else None)
        if k >= len(script.analyses):
            raise LookupError(f"no reason-in-tool reply for step {k}")
        reply = script.analyses[k]
        if reply is ECHO_TOOL_OUTPUT:
            reply = _tail_after(prompt, TOOL_OUTPUT_SENTINEL)
        return Generation(reply, StopReason.END_OF_SEQUENCE)


def script_from_dict(data: dict) -> Script:
    analyses = tuple(ECHO_TOOL_OUTPUT if a is None else a for a in data.get("analyses", ()))
    return Script(tuple(data["steps"]), analyses)


def marker_counts(text: str) -> dict[str, int]:
    return {m: text.count(m) for m in (BEGIN_TOOL_QUERY, END_TOOL_QUERY, BEGIN_TOOL_RESULT, END_TOOL_RESULT)}
