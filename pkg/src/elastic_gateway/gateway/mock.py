"""Offline backends driven by a JSON script, for demos and tests without network access."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..cotool import Generation, ScriptedGenerator, StopReason, script_from_dict
from ..prompts import ANSWER_INSTRUCTION, SYSTEM_PROMPT
from ..rstkit import FixtureTransport, default_registry, make_dispatcher
from .client import MockChatClient
from .router import GatewayClients

DEFAULT_AGENT_REPLY = "<question_level>L2</question_level>"
DEFAULT_ANSWER = "No scripted reply for this question. \\boxed{unknown}"


def data_path(name: str) -> Path:
    return Path(str(resources.files("elastic_gateway").joinpath("data", name)))


def load_script(path: str | Path | None = None) -> dict[str, Any]:
    path = Path(path) if path is not None else data_path("mock_script.json")
    return json.loads(path.read_text(encoding="utf-8"))


def _question_of(content: str) -> str:
    suffix = "\n\n" + ANSWER_INSTRUCTION
    return content[: -len(suffix)] if content.endswith(suffix) else content


@dataclass
class ScriptedBackends:
    """Chat handler: agent calls (system prompt present) get ``agent`` replies, others ``answers``."""

    agent: Mapping[str, str] = field(default_factory=dict)
    answers: Mapping[str, str] = field(default_factory=dict)
    default_agent: str = DEFAULT_AGENT_REPLY
    default_answer: str = DEFAULT_ANSWER

    def __call__(self, body: dict) -> str:
        messages = body.get("messages", [])
        user = next((m["content"] for m in reversed(messages) if m.get("role") == "user"), "")
        is_agent = any(m.get("role") == "system" and m.get("content") == SYSTEM_PROMPT for m in messages)
        if is_agent:
            return self.agent.get(user, self.default_agent)
        return self.answers.get(_question_of(user), self.default_answer)


class _FallbackGenerator:
    """Scripted tool-loop generator that ends unknown questions with the default answer."""

    def __init__(self, scripted: ScriptedGenerator, default: str):
        self.scripted = scripted
        self.default = default

    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None) -> Generation:
        try:
            return self.scripted.generate(prompt, stop, max_tokens)
        except LookupError:
            return Generation(self.default, StopReason.END_OF_SEQUENCE)


def mock_clients(script: Mapping[str, Any] | str | Path | None = None, latency: float = 0.0,
                 wiki_fixture: str | Path | None = None) -> GatewayClients:
    data = script if isinstance(script, Mapping) else load_script(script)
    backends = ScriptedBackends(
        agent=data.get("agent", {}), answers=data.get("answers", {}),
        default_agent=data.get("default_agent", DEFAULT_AGENT_REPLY),
        default_answer=data.get("default_answer", DEFAULT_ANSWER))
    scripts = {q: script_from_dict(s) for q, s in data.get("cotool", {}).items()}
    generator = _FallbackGenerator(ScriptedGenerator(scripts), backends.default_answer)
    transport = FixtureTransport.from_file(wiki_fixture or data_path("wiki_fixture.json"))
    return GatewayClients(chat=MockChatClient(backends, latency=latency), cotool_generator=generator,
                          dispatcher=make_dispatcher(default_registry(transport)))
