"""Level tags, boxed answers and tool markers in generator output.

Markers are matched as exact, case-sensitive literals.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .core import ComplexityLevel

BEGIN_TOOL_QUERY = "<|begin_tool_query|>"
END_TOOL_QUERY = "<|end_tool_query|>"
BEGIN_TOOL_RESULT = "<|begin_tool_result|>"
END_TOOL_RESULT = "<|end_tool_result|>"
LEVEL_OPEN = "<question_level>"
LEVEL_CLOSE = "</question_level>"
DEFAULT_EOS = "<|endoftext|>"


class MalformedSequenceError(ValueError):
    pass


@dataclass(frozen=True)
class LevelTagParse:
    level: ComplexityLevel | None
    inline_answer: str | None
    well_formed: bool
    tag_count: int


_LEVEL_TAG = re.compile(re.escape(LEVEL_OPEN) + r"L([1-4])" + re.escape(LEVEL_CLOSE))


def parse_level_tag(text: str) -> LevelTagParse:
    """Parse a classifier reply such as ``"4 <question_level>L1</question_level>"``.

    Exactly one opening tag, one closing tag and one complete ``Lk`` tag are
    required; anything else (including several tags) is malformed. For L1 the
    text before the tag is taken as the inline answer.
    """
    tag_count = text.count(LEVEL_OPEN)
    close_count = text.count(LEVEL_CLOSE)
    matches = list(_LEVEL_TAG.finditer(text))
    if tag_count != 1 or close_count != 1 or len(matches) != 1:
        return LevelTagParse(None, None, False, tag_count)
    m = matches[0]
    level = ComplexityLevel(int(m.group(1)))
    inline = None
    if level is ComplexityLevel.L1:
        inline = text[:m.start()].strip() or None
    return LevelTagParse(level, inline, True, 1)


class MarkerKind(enum.Enum):
    TOOL_QUERY_START = "ToolQueryStart"
    TOOL_QUERY_END = "ToolQueryEnd"
    TOOL_RESULT_START = "ToolResultStart"
    TOOL_RESULT_END = "ToolResultEnd"
    END_OF_SEQUENCE = "EndOfSequence"


@dataclass(frozen=True)
class MarkerEvent:
    kind: MarkerKind
    byte_offset: int


@dataclass(frozen=True)
class ScannerState:
    """Bytes already consumed plus a held-back tail that may start a marker."""

    consumed_bytes: int = 0
    pending: str = ""
    eos: str = DEFAULT_EOS


def _marker_table(eos: str) -> dict[str, MarkerKind]:
    return {
        BEGIN_TOOL_QUERY: MarkerKind.TOOL_QUERY_START,
        END_TOOL_QUERY: MarkerKind.TOOL_QUERY_END,
        BEGIN_TOOL_RESULT: MarkerKind.TOOL_RESULT_START,
        END_TOOL_RESULT: MarkerKind.TOOL_RESULT_END,
        eos: MarkerKind.END_OF_SEQUENCE,
    }


_PATTERNS: dict[str, tuple[re.Pattern, dict[str, MarkerKind], frozenset[str]]] = {}


def _compiled(eos: str):
    hit = _PATTERNS.get(eos)
    if hit is None:
        table = _marker_table(eos)
        # Longest first so no literal shadows another sharing its prefix.
        literals = sorted(table, key=len, reverse=True)
        pattern = re.compile("|".join(re.escape(m) for m in literals))
        prefixes = frozenset(m[:k] for m in literals for k in range(1, len(m)))
        hit = _PATTERNS[eos] = (pattern, table, prefixes)
    return hit


def scan_markers(state: ScannerState, chunk: str) -> tuple[list[MarkerEvent], ScannerState]:
    """Detect markers in a streamed chunk.

    Any chunking of a text yields the same events as scanning it whole: a
    trailing partial marker is held in the returned state until the next chunk.
    """
    if not chunk:
        return [], state
    pattern, table, prefixes = _compiled(state.eos)
    buf = state.pending + chunk
    events = []
    base = state.consumed_bytes
    last_end = 0
    for m in pattern.finditer(buf):
        offset = base + len(buf[:m.start()].encode("utf-8"))
        events.append(MarkerEvent(table[m.group()], offset))
        last_end = m.end()
    hold = 0
    longest = max(len(p) for p in prefixes)
    for k in range(min(longest, len(buf) - last_end), 0, -1):
        if buf[-k:] in prefixes:
            hold = k
            break
    keep = buf[len(buf) - hold:] if hold else ""
    consumed = base + len(buf[:len(buf) - hold].encode("utf-8"))
    return events, ScannerState(consumed, keep, state.eos)


def scan_text(text: str, eos: str = DEFAULT_EOS) -> list[MarkerEvent]:
    events, _ = scan_markers(ScannerState(eos=eos), text)
    return events


def extract_tool_query(sequence_text: str) -> str:
    """Return the body of the last ``begin/end_tool_query`` pair, trimmed."""
    if not sequence_text.endswith(END_TOOL_QUERY):
        raise MalformedSequenceError("sequence does not end with the tool-query end marker")
    end = len(sequence_text) - len(END_TOOL_QUERY)
    start = sequence_text.rfind(BEGIN_TOOL_QUERY, 0, end)
    if start < 0:
        raise MalformedSequenceError("tool-query end marker has no matching begin marker")
    body = sequence_text[start + len(BEGIN_TOOL_QUERY):end]
    if END_TOOL_QUERY in body:
        raise MalformedSequenceError("tool-query end marker has no matching begin marker")
    return body.strip()


_BOXED = "\\boxed{"


def extract_boxed_answer(text: str) -> str | None:
    """Contents of the last balanced ``\\boxed{...}``, or None."""
    pos = text.rfind(_BOXED)
    while pos >= 0:
        depth = 1
        i = pos + len(_BOXED)
        while i < len(text):
            ch = text[i]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[pos + len(_BOXED):i]
            i += 1
        pos = text.rfind(_BOXED, 0, pos)
    return None
