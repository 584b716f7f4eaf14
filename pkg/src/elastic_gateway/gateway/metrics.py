"""Run-level accounting: exact match, latency, words, level mix, participating parameters."""

from __future__ import annotations

import csv
import io
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from ..core import AnswerKey, Query, TaskKind
from ..reward import accuracy_reward
from .router import RouteTrace


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class CostReport:
    em: float | None
    avg_latency: float
    avg_words: float
    level_distribution: tuple[float, float, float, float]
    participating_params: float
    n: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["level_distribution"] = {f"L{i + 1}": p for i, p in enumerate(self.level_distribution)}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["em", "avg_latency", "avg_words", "L1", "L2", "L3", "L4", "participating_params", "n"])
        w.writerow(["" if self.em is None else self.em, self.avg_latency, self.avg_words,
                    *self.level_distribution, self.participating_params, self.n])
        return buf.getvalue()


def _trace_params(trace: RouteTrace) -> float:
    return max((c.params_b for c in trace.per_call), default=0.0)


def summarize(traces: Sequence[RouteTrace], em: float | None = None) -> CostReport:
    """Aggregate traces; queries whose routing failed before a level was chosen are not in the level mix."""
    if not traces:
        raise EvaluationError("cannot summarize an empty run")
    n = len(traces)
    counts = [0, 0, 0, 0]
    for t in traces:
        if t.level is not None:
            counts[int(t.level) - 1] += 1
    routed = sum(counts)
    dist = tuple(c / routed for c in counts) if routed else (0.0, 0.0, 0.0, 0.0)
    return CostReport(
        em=em,
        avg_latency=sum(t.total_latency for t in traces) / n,
        avg_words=sum(t.total_words for t in traces) / n,
        level_distribution=dist,  # type: ignore[arg-type]
        participating_params=sum(_trace_params(t) for t in traces) / n,
        n=n,
    )


def evaluate_run(dataset: Sequence[Query], traces: Sequence[RouteTrace]) -> CostReport:
    if not dataset:
        raise EvaluationError("dataset is empty")
    if len(dataset) != len(traces):
        raise EvaluationError(f"{len(dataset)} queries but {len(traces)} traces")
    correct = 0.0
    for q, t in zip(dataset, traces):
        if q.id != t.query_id:
            raise EvaluationError(f"trace id {t.query_id!r} does not match query id {q.id!r}")
        if q.gold is None:
            raise EvaluationError(f"query {q.id!r} has no gold answer")
        correct += accuracy_reward(t.answer, q.gold, q.task_kind)
    return summarize(traces, em=correct / len(dataset))


class MetricsAccumulator:
    """Append-only (query, trace) log shared by service workers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._items: list[tuple[Query, RouteTrace]] = []

    def add(self, query: Query, trace: RouteTrace) -> None:
        with self._lock:
            self._items.append((query, trace))

    def report(self) -> CostReport | None:
        with self._lock:
            items = list(self._items)
        if not items:
            return None
        graded = [(q, t) for q, t in items if q.gold is not None]
        em = None
        if graded:
            em = sum(accuracy_reward(t.answer, q.gold, q.task_kind) for q, t in graded) / len(graded)
        return summarize([t for _, t in items], em=em)


def query_from_record(record: dict, line: int | None = None) -> Query:
    where = f"line {line}: " if line is not None else ""
    try:
        qid, text = str(record["id"]), record["question"]
    except KeyError as exc:
        raise EvaluationError(f"{where}missing field {exc.args[0]!r}") from None
    answer = record.get("answer")
    gold = None
    if answer is not None:
        values = [str(a) for a in answer] if isinstance(answer, list) else [str(answer)]
        gold = AnswerKey(values[0], tuple(values[1:]))
    kind = TaskKind.parse(record.get("task_kind", "FreeForm"))
    return Query(qid, text, gold, kind)


def load_dataset(path: str | Path) -> list[Query]:
    """JSON Lines of ``{id, question, answer, task_kind}``; ``answer`` may be a list of aliases."""
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvaluationError(f"line {i}: invalid JSON: {exc.msg}") from None
            q = query_from_record(record, i)
            if q.id in seen:
                raise EvaluationError(f"line {i}: duplicate id {q.id!r}")
            seen.add(q.id)
            out.append(q)
    return out


__all__ = ["CostReport", "EvaluationError", "MetricsAccumulator", "evaluate_run",
           "load_dataset", "query_from_record", "summarize"]
