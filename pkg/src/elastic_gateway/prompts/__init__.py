"""Prompt templates shipped as editable text assets.

Placeholders are ``{NAME}`` tokens filled by plain substitution, so literal
braces in the templates need no escaping.
"""

from importlib import resources


def load(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def render(template: str, **values) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", str(value))
    return template


SYSTEM_PROMPT = load("system_prompt").rstrip("\n")
COTOOL_INSTRUCTION = load("cotool_instruction")
TASK_INSTRUCTION = load("task_instruction").rstrip("\n")
TOOL_SELECTION_TEMPLATE = load("tool_selection").rstrip("\n")
ANSWER_INSTRUCTION = load("answer_instruction").rstrip("\n")


def cotool_instruction(max_tool_calls: int) -> str:
    return render(COTOOL_INSTRUCTION, MAX_TOOL_CALLS=max_tool_calls)
