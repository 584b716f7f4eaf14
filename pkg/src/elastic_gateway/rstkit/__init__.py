"""Reasoning-support toolkit: registry, selection and built-in tools."""

from __future__ import annotations

from .calculator import CalculatorError, eval_expression, format_number
from .codeexec import CodeExecutionTool, ExecResult, echo_executor, execute_generated_code
from .registry import (
    ParamSpec,
    RegistryError,
    SelectionError,
    ToolInvocation,
    ToolOutcome,
    ToolRegistry,
    ToolSpec,
    ToolStatus,
    format_tool_result,
    make_dispatcher,
    parse_selection,
    render_selection_prompt,
    rule_based_selection,
    select_tool,
)
from .wiki import (
    FixtureTransport,
    HttpTransport,
    PageNotFound,
    RecordingTransport,
    Transport,
    TransportError,
    WikiError,
    wiki_get_content,
    wiki_get_summary,
    wiki_search,
)


def default_registry(transport: Transport | None = None, code_tool: CodeExecutionTool | None = None,
                     freeze: bool = True) -> ToolRegistry:
    """Calculator, three wiki tools and the (disabled by default) code tool."""
    transport = transport or HttpTransport()
    code_tool = code_tool or CodeExecutionTool()
    reg = ToolRegistry()

    def calc(inv: ToolInvocation) -> ToolOutcome:
        return ToolOutcome.success("calculator", format_number(eval_expression(inv.parameters["expression"])))

    def search(inv: ToolInvocation) -> ToolOutcome:
        p = inv.parameters
        hits = wiki_search(p["query"], p.get("k", 5), p.get("lang", "en"), transport)
        lines = [f"{title} (page_id={pid})" for title, pid in hits]
        return ToolOutcome.success("wiki_search", "\n".join(lines) if lines else "no results")

    def summary(inv: ToolInvocation) -> ToolOutcome:
        p = inv.parameters
        return ToolOutcome.success("wiki_get_summary", wiki_get_summary(p["query"], p.get("lang", "en"), transport))

    def content(inv: ToolInvocation) -> ToolOutcome:
        p = inv.parameters
        return ToolOutcome.success("wiki_get_content", wiki_get_content(p["query"], p.get("lang", "en"), transport))

    def code(inv: ToolInvocation) -> ToolOutcome:
        return code_tool.run(inv.parameters["task"], inv.parameters.get("context", ""))

    reg.register(ToolSpec("calculator", "Evaluate an arithmetic expression: + - * / % ^, parentheses, "
                          "sqrt, abs, min, max, mean, std, pow.",
                          (ParamSpec("expression", "string"),)), calc)
    reg.register(ToolSpec("wiki_search", "Search Wikipedia; returns up to k article titles and page ids.",
                          (ParamSpec("query", "string"), ParamSpec("k", "integer", False),
                           ParamSpec("lang", "string", False))), search)
    reg.register(ToolSpec("wiki_get_summary", "Introductory summary of a Wikipedia article by title or id.",
                          (ParamSpec("query", "string"), ParamSpec("lang", "string", False))), summary)
    reg.register(ToolSpec("wiki_get_content", "Full plain text of a Wikipedia article by title or id.",
                          (ParamSpec("query", "string"), ParamSpec("lang", "string", False))), content)
    reg.register(ToolSpec("execute_generated_code", "Generate and run Python code for tasks no other tool covers.",
                          (ParamSpec("task", "string"), ParamSpec("context", "string", False))), code)
    return reg.freeze() if freeze else reg


__all__ = [
    "CalculatorError", "CodeExecutionTool", "ExecResult", "FixtureTransport", "HttpTransport",
    "PageNotFound", "ParamSpec", "RecordingTransport", "RegistryError", "SelectionError",
    "ToolInvocation", "ToolOutcome", "ToolRegistry", "ToolSpec", "ToolStatus", "Transport",
    "TransportError", "WikiError", "default_registry", "echo_executor", "eval_expression",
    "execute_generated_code", "format_number", "format_tool_result", "make_dispatcher",
    "parse_selection", "render_selection_prompt", "rule_based_selection", "select_tool",
    "wiki_get_content", "wiki_get_summary", "wiki_search",
]
