"""Code-generation-and-execution tool. Disabled unless an executor is plugged in."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from .registry import ToolOutcome

TOOL_NAME = "execute_generated_code"
CODEGEN_PROMPT = (
    "Write a self-contained Python 3 script that solves the task below and prints the result "
    "to stdout. Output only the code.\n\nTask: {task}\n\nContext:\n{context}\n"
)


@dataclass(frozen=True)
class ExecResult:
    stdout: str
    stderr: str = ""
    exit_status: int = 0


class SandboxExecutor(Protocol):
    def __call__(self, source: str, timeout: float) -> ExecResult: ...


class CodeGenerator(Protocol):
    def generate(self, prompt: str, stop: Sequence[str] = (), max_tokens: int | None = None): ...


def echo_executor(source: str, timeout: float) -> ExecResult:
    return ExecResult(stdout=source)


def _strip_fences(text: str) -> str:
    body = text.strip()
    if body.startswith("```"):
        body = body.split("\n", 1)[1] if "\n" in body else ""
        if body.rstrip().endswith("```"):
            body = body.rstrip()[:-3]
    return body.strip("\n")


class CodeExecutionTool:
    def __init__(self, executor: SandboxExecutor | None = None,
                 code_generator: CodeGenerator | None = None, timeout: float = 10.0):
        self.executor = executor
        self.code_generator = code_generator
        self.timeout = timeout

    def source_for(self, task: str, context: str = "") -> str:
        if self.code_generator is None:
            return task
        reply = self.code_generator.generate(CODEGEN_PROMPT.format(task=task, context=context), (), None)
        return _strip_fences(reply.text if hasattr(reply, "text") else str(reply))

    def run(self, task: str, context: str = "") -> ToolOutcome:
        if self.executor is None:
            return ToolOutcome.error(TOOL_NAME, "code execution disabled")
        source = self.source_for(task, context)
        try:
            result = self.executor(source, self.timeout)
        except TimeoutError:
            return ToolOutcome.error(TOOL_NAME, f"code execution timed out after {self.timeout:g}s")
        if result.exit_status != 0:
            detail = result.stderr.strip() or result.stdout.strip()
            return ToolOutcome.error(TOOL_NAME, f"exit status {result.exit_status}: {detail}")
        payload = result.stdout
        if result.stderr:
            payload += f"\n[stderr]\n{result.stderr}"
        return ToolOutcome.success(TOOL_NAME, payload)


def execute_generated_code(request: dict, tool: CodeExecutionTool | None = None) -> ToolOutcome:
    tool = tool or CodeExecutionTool()
    return tool.run(request.get("task", ""), request.get("context", ""))

