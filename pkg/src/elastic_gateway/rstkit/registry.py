"""Tool registry, tool-selection contract and result formatting."""

from __future__ import annotations

import enum
import json
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol, Sequence

from ..prompts import TOOL_SELECTION_TEMPLATE, render

logger = logging.getLogger(__name__)

_JSON_TYPES = {
    "string": (str,),
    "integer": (int,),
    "number": (int, float),
    "boolean": (bool,),
    "object": (dict,),
    "array": (list,),
}


class RegistryError(ValueError):
    pass


class SelectionError(ValueError):
    pass


class ToolStatus(enum.Enum):
    SUCCESS = "success"
    ERROR = "error"


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    required: bool = True
    description: str = ""

    def __post_init__(self) -> None:
        if self.type not in _JSON_TYPES:
            raise RegistryError(f"unknown parameter type {self.type!r}")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params_schema: tuple[ParamSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "params_schema", tuple(self.params_schema))

    def render(self) -> str:
        params = ", ".join(
            f"{p.name}: {p.type}{'' if p.required else ' (optional)'}" for p in self.params_schema)
        return f"- {self.name}({params}): {self.description}"


@dataclass(frozen=True)
class ToolInvocation:
    tool_name: str
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"tool_name": self.tool_name, "parameters": dict(self.parameters)})


@dataclass(frozen=True)
class ToolOutcome:
    status: ToolStatus
    payload: str
    tool_name: str
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        if self.status is ToolStatus.ERROR and not self.payload:
            raise ValueError("error outcomes need a non-empty payload")

    @classmethod
    def success(cls, tool_name: str, payload: str, elapsed: float = 0.0) -> "ToolOutcome":
        return cls(ToolStatus.SUCCESS, payload, tool_name, elapsed)

    @classmethod
    def error(cls, tool_name: str, payload: str, elapsed: float = 0.0) -> "ToolOutcome":
        return cls(ToolStatus.ERROR, payload or "unknown error", tool_name, elapsed)


Executor = Callable[[ToolInvocation], ToolOutcome]


class ToolRegistry:
    def __init__(self) -> None:
        self._specs: dict[str, ToolSpec] = {}
        self._executors: dict[str, Executor] = {}
        self._frozen = False

    def register(self, spec: ToolSpec, executor: Executor) -> "ToolRegistry":
        if self._frozen:
            raise RegistryError("registry is frozen")
        if spec.name in self._specs:
            raise RegistryError(f"tool {spec.name!r} is already registered")
        self._specs[spec.name] = spec
        self._executors[spec.name] = executor
        return self

    def freeze(self) -> "ToolRegistry":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def list_tools(self) -> list[ToolSpec]:
        return list(self._specs.values())

    def get(self, name: str) -> ToolSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise SelectionError(f"unknown tool {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __len__(self) -> int:
        return len(self._specs)

    def validate(self, inv: ToolInvocation) -> ToolInvocation:
        spec = self.get(inv.tool_name)
        params = dict(inv.parameters)
        known = {p.name for p in spec.params_schema}
        extra = sorted(set(params) - known)
        if extra:
            raise SelectionError(f"{spec.name}: unexpected parameter {extra[0]!r}")
        for p in spec.params_schema:
            if p.name not in params:
                if p.required:
                    raise SelectionError(f"{spec.name}: missing required parameter {p.name!r}")
                continue
            value = params[p.name]
            ok = isinstance(value, _JSON_TYPES[p.type])
            if p.type in ("integer", "number") and isinstance(value, bool):
                ok = False
            if not ok:
                raise SelectionError(f"{spec.name}: parameter {p.name!r} must be {p.type}")
        return ToolInvocation(spec.name, params)

    def invoke(self, inv: ToolInvocation) -> ToolOutcome:
        """Run a validated invocation; executor exceptions become error outcomes."""
        inv = self.validate(inv)
        start = time.perf_counter()
        try:
            outcome = self._executors[inv.tool_name](inv)
        except Exception as exc:  # tool failures are reported to the model, not raised
            logger.debug("tool %s failed: %s", inv.tool_name, exc)
            return ToolOutcome.error(inv.tool_name, f"{type(exc).__name__}: {exc}",
                                     time.perf_counter() - start)
        if outcome.elapsed == 0.0:
            outcome = ToolOutcome(outcome.status, outcome.payload, outcome.tool_name,
                                  time.perf_counter() - start)
        return outcome

    def tool_list_text(self) -> str:
        return "\n".join(spec.render() for spec in self._specs.values())


def format_tool_result(outcome: ToolOutcome) -> str:
    return f"tool: {outcome.tool_name}\nstatus: {outcome.status.value}\noutput: {outcome.payload}"


# --- selection ------------------------------------------------------------

class TextGenerator(Protocol):
    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None): ...


def parse_selection(raw: str) -> ToolInvocation:
    """Parse a selector reply that must be exactly one JSON object."""
    try:
        data = json.loads(raw.strip())
    except json.JSONDecodeError as exc:
        raise SelectionError(f"selector reply is not a single JSON object: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SelectionError("selector reply must be a JSON object")
    if set(data) != {"tool_name", "parameters"}:
        raise SelectionError("selector reply must have exactly 'tool_name' and 'parameters'")
    if not isinstance(data["tool_name"], str) or not isinstance(data["parameters"], dict):
        raise SelectionError("'tool_name' must be a string and 'parameters' an object")
    return ToolInvocation(data["tool_name"], data["parameters"])


def render_selection_prompt(tool_query: str, registry: ToolRegistry) -> str:
    return render(TOOL_SELECTION_TEMPLATE, TOOL_LIST=registry.tool_list_text(), TOOL_QUERY=tool_query)


_ARITH = re.compile(r"\d\s*[-+*/^%]\s*[\d(.]|[-+*/^%]\s*\(|\b(?:sqrt|abs|mean|std|pow|min|max)\s*\(")
_CALC_VERBS = re.compile(r"^\s*(?:please\s+)?(?:calculate|compute|evaluate|calc|solve|what\s+is)\s*:?\s*", re.I)
_QUESTION = re.compile(r"^\s*(?:what|who|whom|whose|where|when|which|how|why|tell me about|describe|define)\b", re.I)
_SEARCH = re.compile(r"^\s*(?:search(?:\s+for)?|look\s+up|find)\b\s*:?\s*", re.I)
_STOPWORDS = frozenset(
    "a an the of about for in on at to is are was were be been do does did what who whom whose where "
    "when which how why typical typically usual usually common commonly main kind kinds type types "
    "habitat habitats tell me describe define please and or with by from their its his her".split())


def _topic(text: str) -> str:
    words = re.findall(r"[A-Za-z][A-Za-z'\-]*", text)
    content = [w for w in words if w.lower() not in _STOPWORDS]
    if not content:
        return text.strip(" ?.!")
    word = content[-1]
    lower = word.lower()
    if lower.endswith("ies") and len(lower) > 4:
        word = word[:-3] + "y"
    elif lower.endswith("s") and not lower.endswith("ss") and len(lower) > 3:
        word = word[:-1]
    return word.lower()


def rule_based_selection(tool_query: str, registry: ToolRegistry) -> ToolInvocation:
    """Offline keyword routing: arithmetic -> calculator, lookups -> wiki, else code tool."""
    q = tool_query.strip()
    if _ARITH.search(q) and "calculator" in registry:
        expr = _CALC_VERBS.sub("", q).rstrip(" ?=.")
        return ToolInvocation("calculator", {"expression": expr})
    m = _SEARCH.match(q)
    if m and "wiki_search" in registry:
        return ToolInvocation("wiki_search", {"query": q[m.end():].strip(" ?.")})
    if _QUESTION.match(q) and "wiki_get_summary" in registry:
        return ToolInvocation("wiki_get_summary", {"query": _topic(q)})
    if "execute_generated_code" in registry:
        return ToolInvocation("execute_generated_code", {"task": q})
    raise SelectionError(f"no tool can serve query {q!r}")


def select_tool(tool_query: str, registry: ToolRegistry,
                selector: TextGenerator | None = None, retries: int = 1) -> ToolInvocation:
    """Choose a tool for a tool query; the result is always schema-validated.

    With a generator selector the selection prompt is rendered and the reply
    must be one JSON object; one retry is made on an unparseable reply.
    """
    if len(registry) == 0:
        raise SelectionError("registry is empty")
    if selector is None:
        return registry.validate(rule_based_selection(tool_query, registry))
    prompt = render_selection_prompt(tool_query, registry)
    last: SelectionError | None = None
    for _ in range(retries + 1):
        reply = selector.generate(prompt, (), None)
        text = reply.text if hasattr(reply, "text") else str(reply)
        try:
            inv = parse_selection(text)
        except SelectionError as exc:
            last = exc
            continue
        return registry.validate(inv)
    assert last is not None
    raise last


def make_dispatcher(registry: ToolRegistry, selector: TextGenerator | None = None) -> Callable[[str], str]:
    """Tool-query text -> formatted tool output; failures come back as ``status: error`` blocks."""
    def dispatch(tool_query: str) -> str:
        try:
            inv = select_tool(tool_query, registry, selector)
        except SelectionError as exc:
            return format_tool_result(ToolOutcome.error("tool_selection", str(exc)))
        return format_tool_result(registry.invoke(inv))
    return dispatch
