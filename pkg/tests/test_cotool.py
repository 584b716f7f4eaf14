from __future__ import annotations

import io
import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from elastic_gateway.cotool import (
    LIMIT_MESSAGE,
    ECHO_TOOL_OUTPUT,
    CoToolInstructions,
    CoToolLimits,
    EchoGenerator,
    Generation,
    JsonlTraceSink,
    Script,
    ScriptedGenerator,
    SequenceState,
    SequenceStatus,
    StopReason,
    build_reason_input,
    handle_tool_query,
    marker_counts,
    reason_in_tool,
    run_batch,
)
from elastic_gateway.prompts import TASK_INSTRUCTION
from cotool_cases import (
    BATCH,
    BQ,
    BR,
    CALC_Q,
    EQ,
    ER,
    EXPECTED_CALC,
    EXPECTED_LIMIT,
    EXPECTED_NO_TOOL,
    NO_TOOL_Q,
    CountingDispatcher,
    run_case,
)


def test_no_tool_path():
    seq, dispatcher, prompt = run_case(NO_TOOL_Q)
    assert seq.status is SequenceStatus.FINISHED and seq.tool_calls == 0
    assert seq.text == prompt + EXPECTED_NO_TOOL
    assert dispatcher.calls == []


def test_single_calculator_call():
    seq, dispatcher, prompt = run_case(CALC_Q)
    assert seq.status is SequenceStatus.FINISHED and seq.tool_calls == 1
    assert seq.text == prompt + EXPECTED_CALC
    assert dispatcher.calls == ["calculate 5^3 - 9*(5)^2 + 23*5 -21"]


def test_limit_message_without_dispatch():
    seq, dispatcher, prompt = run_case(CALC_Q, max_tool_calls=0)
    assert seq.text == prompt + EXPECTED_LIMIT
    assert dispatcher.calls == [] and seq.executed_calls == 0 and seq.tool_calls == 1
    assert LIMIT_MESSAGE == "reaching max tool call limitations, you cannot use tools anymore"


def _three_query_script(question: str) -> dict:
    steps = tuple(f"step {i} {BQ}{i} + {i}{EQ}" for i in range(3)) + (" \\boxed{done}",)
    return {question: Script(steps, (ECHO_TOOL_OUTPUT,) * 3)}


def test_limit_boundary():
    q = "Add some numbers."
    dispatcher = CountingDispatcher()
    (seq,) = run_batch(ScriptedGenerator(_three_query_script(q)), dispatcher, [q],
                       limits=CoToolLimits(max_tool_calls=2))
    assert dispatcher.calls == ["0 + 0", "1 + 1"]
    blocks = seq.generated.split(BR)[1:]
    assert [b.split(ER)[0] for b in blocks] == [
        "tool: calculator\nstatus: success\noutput: 0",
        "tool: calculator\nstatus: success\noutput: 2",
        LIMIT_MESSAGE,
    ]
    assert seq.tool_calls == 3 and seq.executed_calls == 2 and seq.status is SequenceStatus.FINISHED


def test_dispatcher_error_payload_is_injected():
    q = "Divide by zero."
    script = {q: Script((f"Try it. {BQ}1/0{EQ}", " \\boxed{undefined}"), (ECHO_TOOL_OUTPUT,))}
    (seq,) = run_batch(ScriptedGenerator(script), CountingDispatcher(), [q])
    assert f"{BR}tool: calculator\nstatus: error\noutput: CalcZeroDivisionError: division by zero{ER}" in seq.text
    assert seq.status is SequenceStatus.FINISHED


def test_dispatcher_exception_becomes_error_result():
    q = "Anything."
    script = {q: Script((f"{BQ}x{EQ}", "\\boxed{1}"), (ECHO_TOOL_OUTPUT,))}

    def broken(query):
        raise RuntimeError("tool backend down")

    (seq,) = run_batch(ScriptedGenerator(script), broken, [q])
    assert "status: error" in seq.text and "tool backend down" in seq.text
    assert seq.status is SequenceStatus.FINISHED


def test_handle_tool_query_keeps_sequence_unfinished():
    q = "Divide by zero."
    prompt = "I " + q
    seq = SequenceState("s", prompt, prompt + f"{BQ}1/0{EQ}")
    handle_tool_query(seq, CountingDispatcher(), EchoGenerator(), TASK_INSTRUCTION, CoToolLimits())
    assert seq.status is SequenceStatus.UNFINISHED
    assert seq.text.endswith(f"{BR}tool: calculator\nstatus: error\noutput: CalcZeroDivisionError: division by zero{ER}")


def test_handle_tool_query_malformed_aborts():
    seq = SequenceState("s", "p", "p" + f"no begin marker{EQ}")
    handle_tool_query(seq, CountingDispatcher(), EchoGenerator(), TASK_INSTRUCTION, CoToolLimits())
    assert seq.status is SequenceStatus.ABORTED and "malformed" in seq.diagnostic


def test_reason_in_tool_contract():
    I_T = build_reason_input(TASK_INSTRUCTION, "2+2", "seq text", "tool: calculator\nstatus: success\noutput: 4")
    assert reason_in_tool(EchoGenerator(), I_T) == "tool: calculator\nstatus: success\noutput: 4"
    assert build_reason_input("I:", "q", "s", "o") == "I:qso"

    class Empty:
        def generate(self, prompt, stop=(), max_tokens=None):
            assert stop == ()
            return Generation("", StopReason.END_OF_SEQUENCE)

    q = "Empty analysis."
    script = {q: Script((f"{BQ}1+1{EQ}", "\\boxed{2}"), ("",))}
    (seq,) = run_batch(ScriptedGenerator(script), CountingDispatcher(), [q], reason_generator=Empty())
    assert f"{EQ}{BR}{ER}\\boxed{{2}}" in seq.text


def test_scripted_analysis_is_wrapped():
    q = "Scripted."
    script = {q: Script((f"{BQ}1+1{EQ}", "done"), ("The tool says two.",))}
    (seq,) = run_batch(ScriptedGenerator(script), CountingDispatcher(), [q])
    assert f"{BR}The tool says two.{ER}done" in seq.text


def test_generator_failure_aborts_with_diagnostic():
    class Broken:
        def generate(self, prompt, stop=(), max_tokens=None):
            raise ConnectionError("backend gone")

    (seq,) = run_batch(Broken(), CountingDispatcher(), ["q"])
    assert seq.status is SequenceStatus.ABORTED and "backend gone" in seq.diagnostic


def test_turn_limit_aborts_with_partial_text():
    q = "Loop forever."
    script = {q: Script(tuple(f"again {BQ}1+1{EQ}" for _ in range(20)), (ECHO_TOOL_OUTPUT,) * 20)}
    (seq,) = run_batch(ScriptedGenerator(script), CountingDispatcher(), [q],
                       limits=CoToolLimits(max_tool_calls=4, max_turn=3))
    assert seq.status is SequenceStatus.ABORTED and seq.turns == 3
    assert "max turns" in seq.diagnostic and seq.generated.count(BR) == 3


def test_length_cap_continues_generation():
    q = "Long."

    class Capped:
        def __init__(self):
            self.n = 0

        def generate(self, prompt, stop=(), max_tokens=None):
            self.n += 1
            if self.n == 1:
                return Generation("part one, ", StopReason.LENGTH_CAP)
            return Generation("part two \\boxed{1}", StopReason.END_OF_SEQUENCE)

    (seq,) = run_batch(Capped(), CountingDispatcher(), [q])
    assert seq.generated == "part one, part two \\boxed{1}" and seq.turns == 2


def test_output_order_and_order_invariance():
    questions = list(BATCH)
    texts = None
    for perm in itertools.permutations(range(3)):
        states = run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), questions, order=perm)
        assert [s.id for s in states] == ["0", "1", "2"]
        got = [s.text for s in states]
        texts = texts or got
        assert got == texts
    threaded = run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), questions, workers=3)
    assert [s.text for s in threaded] == texts
    with pytest.raises(ValueError):
        run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), questions, order=[0, 0, 1])


def test_empty_instructions_rejected():
    with pytest.raises(ValueError):
        run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), ["q"], CoToolInstructions("", "x"))


def test_trace_log_records():
    buf = io.StringIO()
    run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), list(BATCH), trace=JsonlTraceSink(buf))
    records = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert {r["event"] for r in records} == {"generate", "tool_query", "tool_result", "finish"}
    assert all({"sequence_id", "byte_offset", "duration_s"} <= set(r) for r in records)
    for sid in {r["sequence_id"] for r in records}:
        offsets = [r["byte_offset"] for r in records if r["sequence_id"] == sid]
        assert offsets == sorted(offsets)


class PromptLog:
    def __init__(self, inner):
        self.inner = inner
        self.main_prompts: list[str] = []

    def generate(self, prompt, stop=(), max_tokens=None):
        if stop:
            self.main_prompts.append(prompt)
        return self.inner.generate(prompt, stop, max_tokens)


step = st.one_of(st.just("tool"), st.text(alphabet="abc \\{}", max_size=8))


@given(st.lists(st.lists(step, max_size=6), min_size=1, max_size=3), st.integers(0, 4), st.integers(1, 8))
def test_loop_invariants(plans, max_calls, max_turn):
    scripts = {}
    for i, plan in enumerate(plans):
        steps = tuple(f"s{j} {BQ}{j}+{i}{EQ}" if s == "tool" else f"t{j} {s}" for j, s in enumerate(plan))
        steps = tuple(s for s in steps if s.endswith(EQ)) + (f"final {i}",)
        scripts[f"[question {i}]"] = Script(steps, (ECHO_TOOL_OUTPUT,) * len(steps))
    limits = CoToolLimits(max_calls, max_turn)
    gen = PromptLog(ScriptedGenerator(scripts))
    dispatcher = CountingDispatcher()
    states = run_batch(gen, dispatcher, list(scripts), limits=limits)
    again = run_batch(ScriptedGenerator(scripts), CountingDispatcher(), list(scripts), limits=limits)
    assert [s.text for s in states] == [s.text for s in again]
    for s in states:
        assert s.executed_calls <= max_calls and s.turns <= max_turn
        counts = marker_counts(s.generated)
        if s.status is SequenceStatus.FINISHED:
            assert set(counts.values()) == {s.tool_calls}
            assert s.generated.endswith(s.generated.rsplit(ER, 1)[-1])
    for q in scripts:
        chain = [p for p in gen.main_prompts if q in p]
        assert all(b.startswith(a) for a, b in zip(chain, chain[1:]))
    assert len(dispatcher.calls) == sum(s.executed_calls for s in states)


def test_tool_query_repeating_the_question():
    q = "What is the typical habitat of marmots?"
    script = {q: Script((f"Look it up. {BQ}{q}{EQ}", " \\boxed{mountains}"), ("Marmots live in mountains.",))}
    (seq,) = run_batch(ScriptedGenerator(script), CountingDispatcher(), [q])
    assert seq.status is SequenceStatus.FINISHED
    assert f"{BR}Marmots live in mountains.{ER}" in seq.text
