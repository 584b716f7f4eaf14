"""Composite routing reward: format + accuracy + hierarchy."""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .core import AnswerKey, ComplexityLevel, TaskKind
from .tagparse import LevelTagParse, extract_boxed_answer

NUMERIC_TOL = 1e-9
HIERARCHY_BASE_STEP = Fraction(1, 2)
HIERARCHY_PENALTY_STEP = Fraction(1, 5)


@dataclass(frozen=True)
class RewardBreakdown:
    format: float
    accuracy: float
    hierarchy: float
    total: float


@dataclass(frozen=True)
class HierarchyContext:
    selected: ComplexityLevel
    minimal: ComplexityLevel

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected", ComplexityLevel(self.selected))
        object.__setattr__(self, "minimal", ComplexityLevel(self.minimal))


def format_reward(parse: LevelTagParse) -> float:
    return 1.0 if parse.well_formed else 0.0


def _hierarchy_exact(selected: int, minimal: int) -> Fraction:
    base = HIERARCHY_BASE_STEP * (minimal - 1)
    penalty = HIERARCHY_PENALTY_STEP * max(selected - minimal, 0)
    return base - penalty


def hierarchy_reward(ctx: HierarchyContext) -> float:
    """Base credit for the minimal sufficient level minus 0.2 per level of over-selection.

    Computed with rationals so table values such as -0.6 come out as the
    nearest double to the decimal, not an accumulated float sum.
    """
    return float(_hierarchy_exact(int(ctx.selected), int(ctx.minimal)))


# --- answer normalisation -------------------------------------------------

_WS = re.compile(r"\s+")
_PAREN_LETTER = re.compile(r"\(([A-Ea-e])\)")
_CLOSE_LETTER = re.compile(r"(?<![A-Za-z0-9(])([A-Ea-e])\)")
_BARE_LETTER = re.compile(r"(?<![A-Za-z0-9])([A-E])(?![A-Za-z0-9])")


def _option_letter(text: str) -> str | None:
    stripped = text.strip().strip(".:").strip()
    if len(stripped) == 1 and stripped.upper() in "ABCDE":
        return stripped.lower()
    if re.match(r"^\(?([A-Ea-e])\)", stripped):
        return re.match(r"^\(?([A-Ea-e])\)", stripped).group(1).lower()
    for pattern in (_PAREN_LETTER, _CLOSE_LETTER, _BARE_LETTER):
        letters = {m.group(1).lower() for m in pattern.finditer(text)}
        if len(letters) == 1:
            return letters.pop()
        if len(letters) > 1:
            return None
    return None


def normalize_answer(text: str, kind: TaskKind = TaskKind.FREE_FORM) -> str:
    text = unicodedata.normalize("NFC", text)
    boxed = extract_boxed_answer(text)
    if boxed is not None:
        text = boxed
    text = text.strip()
    if len(text) >= 2 and text.startswith("$") and text.endswith("$"):
        text = text.strip("$").strip()
    if kind is TaskKind.MULTIPLE_CHOICE:
        letter = _option_letter(text)
        if letter is not None:
            return letter
    text = _WS.sub(" ", text).lower()
    text = text.rstrip(".").rstrip()
    return text


_FRAC = re.compile(r"^(-?)\\d?frac\{([^{}]+)\}\{([^{}]+)\}$")


def parse_number(text: str) -> float | None:
    """Best-effort numeric value of a normalised answer string."""
    s = text.replace(",", "").replace(" ", "").replace("\\!", "")
    s = s.removeprefix("\\(").removesuffix("\\)")
    m = _FRAC.match(s)
    if m:
        num, den = parse_number(m.group(2)), parse_number(m.group(3))
        if num is None or den in (None, 0.0):
            return None
        value = num / den
        return -value if m.group(1) else value
    if s.count("/") == 1:
        a, b = s.split("/")
        num, den = parse_number(a), parse_number(b)
        if num is None or den in (None, 0.0):
            return None
        return num / den
    try:
        value = float(s)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def answers_match(predicted: str, key: AnswerKey, kind: TaskKind) -> bool:
    pred = normalize_answer(predicted, kind)
    if kind is TaskKind.NUMERIC:
        pred_val = parse_number(pred)
        for cand in key.candidates():
            norm = normalize_answer(cand, kind)
            gold_val = parse_number(norm)
            if pred_val is not None and gold_val is not None:
                if math.isclose(pred_val, gold_val, rel_tol=NUMERIC_TOL, abs_tol=NUMERIC_TOL):
                    return True
            elif pred == norm:
                return True
        return False
    return any(pred == normalize_answer(cand, kind) for cand in key.candidates())


def accuracy_reward(predicted: str | None, key: AnswerKey, kind: TaskKind) -> float:
    if predicted is None:
        return 0.0
    return 1.0 if answers_match(predicted, key, kind) else 0.0


def composite_reward(parse: LevelTagParse, predicted: str | None, key: AnswerKey,
                     kind: TaskKind, ctx: HierarchyContext) -> RewardBreakdown:
    fmt = format_reward(parse)
    acc = accuracy_reward(predicted, key, kind)
    hier = hierarchy_reward(ctx)
    return RewardBreakdown(fmt, acc, hier, fmt + acc + hier)


def probe_minimal_level(query_key: AnswerKey, kind: TaskKind,
                        answer_at: Callable[[ComplexityLevel], str | None]) -> ComplexityLevel:
    """Label a real query: lowest level whose backend answers correctly, else L4."""
    for lvl in ComplexityLevel:
        if accuracy_reward(answer_at(lvl), query_key, kind) == 1.0:
            return lvl
    return ComplexityLevel.L4
