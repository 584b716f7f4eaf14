"""Acceptance suite: one test per criterion; run directly for a pass/fail summary."""

from __future__ import annotations

import contextlib
import io
import itertools
import json
import math
import sys
from decimal import Decimal
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from cotool_cases import (  # noqa: E402
    BATCH, CALC_Q, EXPECTED_CALC, EXPECTED_LIMIT, EXPECTED_NO_TOOL, NO_TOOL_Q, CountingDispatcher, run_case,
)
from oracles import finite_difference_gradient, flat, perturb, random_corpus, random_groups, random_params  # noqa: E402
from test_gateway import run_mini20  # noqa: E402
from test_rstkit import GOLDEN  # noqa: E402
from test_tagparse import check_chunking_invariance  # noqa: E402

from elastic_gateway import cli  # noqa: E402
from elastic_gateway.core import AnswerKey, ComplexityLevel, TaskKind  # noqa: E402
from elastic_gateway.cotool import ScriptedGenerator, run_batch  # noqa: E402
from elastic_gateway.gateway import evaluate_run  # noqa: E402
from elastic_gateway.grpo import (  # noqa: E402
    SimEnvSpec, TrainConfig, evaluate_greedy, group_advantages, surrogate_gradient, surrogate_objective,
    train_router,
)
from elastic_gateway.reward import HierarchyContext, composite_reward, hierarchy_reward  # noqa: E402
from elastic_gateway.rstkit.calculator import eval_expression  # noqa: E402
from elastic_gateway.tagparse import LevelTagParse  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
SEEDS = (21, 26, 42)


def test_criterion_1_hierarchy_golden_table():
    got = [hierarchy_reward(HierarchyContext(sel, 1)) for sel in range(1, 5)]
    assert [Decimal(repr(v)) for v in got] == [Decimal("0"), Decimal("-0.2"), Decimal("-0.4"), Decimal("-0.6")]


def test_criterion_2_reward_optimality():
    for minimal in ComplexityLevel:
        totals = {}
        for sel in ComplexityLevel:
            parse = LevelTagParse(sel, None, True, 1)
            pred = "1" if sel >= minimal else "0"
            totals[sel] = composite_reward(parse, pred, AnswerKey("1"), TaskKind.NUMERIC,
                                           HierarchyContext(sel, minimal)).total
        best = max(totals.values())
        assert [s for s, t in totals.items() if t == best] == [minimal], (minimal, totals)


def test_criterion_3_grpo_math():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(1000):
        rewards = rng.normal(size=rng.integers(2, 33)) * rng.uniform(0.01, 100)
        adv = np.array(group_advantages(rewards))
        assert abs(adv.mean()) < 1e-9 and abs(adv.std() - 1.0) < 1e-9
        checked += 1
    assert checked == 1000
    assert group_advantages([0, 1]) == [-1.0, 1.0]
    for seed in range(50):
        r = np.random.default_rng(1000 + seed)
        old = random_params(r, 3)
        params, ref = perturb(old, r, 0.4), random_params(r, 3)
        groups = random_groups(old, r, 3, 6)
        analytic = flat(*surrogate_gradient(params, old, ref, groups, 0.2, 0.04))
        numeric = finite_difference_gradient(lambda p: surrogate_objective(p, old, ref, groups, 0.2, 0.04), params)
        assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric), seed


def test_criterion_4_simulator_convergence():
    hits, shifts = [], []
    for seed in SEEDS:
        env = SimEnvSpec.separable(feature_dim=8, noise_sigma=0.1, seed=seed)
        full = evaluate_greedy(train_router(env, TrainConfig(iterations=500, seed=seed)).params, env)
        ablated = evaluate_greedy(
            train_router(env, TrainConfig(iterations=500, seed=seed, hierarchy_weight=0.0)).params, env)
        hits.append(full.minimal_hit_rate)
        shifts.append(ablated.level_histogram[3] - full.level_histogram[3])
    print(f"hit rates {hits}, L4 shift without hierarchy {shifts}")
    assert sum(h >= 0.90 for h in hits) >= 2
    assert min(shifts) >= 0.20


def test_criterion_5_cotool_conformance():
    for question, expected, limit in ((NO_TOOL_Q, EXPECTED_NO_TOOL, 4), (CALC_Q, EXPECTED_CALC, 4),
                                      (CALC_Q, EXPECTED_LIMIT, 0)):
        seq, dispatcher, prompt = run_case(question, max_tool_calls=limit)
        assert seq.text == prompt + expected
        if limit == 0:
            assert dispatcher.calls == []
    check_chunking_invariance(1000, seed=5)
    questions = list(BATCH)
    reference = [s.text for s in run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), questions)]
    for perm in itertools.permutations(range(len(questions))):
        states = run_batch(ScriptedGenerator(BATCH), CountingDispatcher(), questions, order=perm)
        assert [s.text for s in states] == reference, perm


def test_criterion_6_calculator():
    assert eval_expression("5^3 - 9*(5)^2 + 23*5 -21") == -6
    assert len(GOLDEN) >= 20
    for expr, value in GOLDEN:
        assert abs(eval_expression(expr) - value) <= 1e-9, expr
    corpus = random_corpus(200)
    assert len(corpus) == 200
    for text, expected in corpus:
        assert math.isclose(eval_expression(text), expected, rel_tol=1e-12, abs_tol=1e-300), text


def test_criterion_7_end_to_end_mock_gateway():
    dataset, traces, sheet = run_mini20(ROOT)
    assert len(dataset) == 20
    assert {t.level for t in traces} == set(ComplexityLevel)
    for t, row in zip(traces, sheet):
        if t.parsed.well_formed:
            assert t.level == t.parsed.level and not t.fallback
        else:
            assert t.level is ComplexityLevel.L2 and t.fallback
        assert t.level.name == row["expected_level"]
    report = evaluate_run(dataset, traces)
    assert report.em == sum(int(r["correct"]) for r in sheet) / len(sheet)
    assert abs(sum(report.level_distribution) - 1.0) <= 1e-9


def test_criterion_8_report_schema():
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        rc = cli.main(["eval", "--mock", "--dataset", str(ROOT / "fixtures" / "mini20.jsonl")])
    assert rc == 0
    report = json.loads(buf.getvalue())
    assert {"em", "avg_latency", "avg_words", "level_distribution", "participating_params", "n"} <= set(report)
    assert set(report["level_distribution"]) == {"L1", "L2", "L3", "L4"}


CRITERIA = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]

if __name__ == "__main__":
    failed = 0
    for fn in sorted(CRITERIA, key=lambda f: int(f.__name__.split("_")[2])):
        _, _, num, *title = fn.__name__.split("_")
        try:
            fn()
            status = "PASS"
        except Exception as exc:  # report and keep going
            status, failed = f"FAIL ({type(exc).__name__}: {exc})", failed + 1
        print(f"criterion {num}: {status}  {' '.join(title)}")
    sys.exit(1 if failed else 0)
