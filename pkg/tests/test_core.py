from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from elastic_gateway.core import (
    AnswerKey,
    BackendProfile,
    ComplexityLevel,
    ConfigError,
    CostModel,
    GatewayConfig,
    Query,
    RoutingAction,
    TaskKind,
    action_cost,
    action_to_level,
    config_from_dict,
    config_to_dict,
    default_config,
    level_to_action,
    load_config,
    routing_objective,
)


def minimal_config_dict(**top):
    backends = {f"L{i}": {"endpoint_url": "http://localhost:1/v1/chat/completions", "model_name": f"m{i}"}
                for i in range(1, 5)}
    return {"backends": backends, **top}


def test_level_action_mapping():
    assert level_to_action(ComplexityLevel.L1) is RoutingAction.NO_THINK
    assert level_to_action(ComplexityLevel.L4) is RoutingAction.DELEGATE
    assert action_to_level(level_to_action(ComplexityLevel.L3)) is ComplexityLevel.L3


@pytest.mark.parametrize("level", list(ComplexityLevel))
def test_bijection_round_trips(level):
    assert action_to_level(level_to_action(level)) is level
    assert level_to_action(action_to_level(level_to_action(level))) is level_to_action(level)
    assert len({level_to_action(l) for l in ComplexityLevel}) == 4


def test_levels_are_totally_ordered():
    assert ComplexityLevel.L1 < ComplexityLevel.L2 < ComplexityLevel.L3 < ComplexityLevel.L4
    assert [l.ordinal for l in ComplexityLevel] == [1, 2, 3, 4]


@pytest.mark.parametrize("text,expected", [("L3", 3), ("l2", 2), ("4", 4), (1, 1)])
def test_level_parse(text, expected):
    assert ComplexityLevel.parse(text) == expected


@pytest.mark.parametrize("bad", ["L5", "L0", "x", 0, True])
def test_level_parse_rejects(bad):
    with pytest.raises(ValueError):
        ComplexityLevel.parse(bad)


def test_action_cost_defaults_and_custom():
    model = CostModel()
    assert action_cost(model, RoutingAction.NO_THINK) == 1.0
    assert action_cost(model, RoutingAction.DELEGATE) >= action_cost(model, RoutingAction.NO_THINK)
    assert model.is_monotone()
    custom = CostModel({RoutingAction.THINK: 2.5}, {})
    assert action_cost(custom, RoutingAction.THINK) == 2.5
    with pytest.raises(ConfigError):
        action_cost(custom, RoutingAction.DELEGATE)


def test_cost_model_rejects_negative_cost_and_bad_quality():
    with pytest.raises(ConfigError):
        CostModel({RoutingAction.THINK: -1.0})
    with pytest.raises(ConfigError):
        CostModel(quality_per_action={RoutingAction.THINK: 1.5})


def test_routing_objective_is_cost_minus_quality():
    model = CostModel()
    got = routing_objective(model, [RoutingAction.NO_THINK, RoutingAction.DELEGATE])
    assert got == pytest.approx((1.0 - 0.6) + (24.0 - 0.9))


def test_answer_key_and_query_invariants():
    with pytest.raises(ValueError):
        AnswerKey("")
    with pytest.raises(ValueError):
        AnswerKey("a", ("b", "b"))
    with pytest.raises(ValueError):
        Query("q", "")
    assert AnswerKey("a", ("b",)).candidates() == ("a", "b")
    assert TaskKind.parse("multiple_choice") is TaskKind.MULTIPLE_CHOICE


def test_load_minimal_config_applies_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(minimal_config_dict()), encoding="utf-8")
    cfg = load_config(path)
    assert cfg.group_size == 12
    assert cfg.max_tokens == 8192
    assert cfg.clip_eps == 0.2 and cfg.kl_beta == 0.04
    assert cfg.max_tool_calls == 4 and cfg.max_turn == 8


def test_missing_level_names_it():
    data = minimal_config_dict()
    del data["backends"]["L3"]
    with pytest.raises(ConfigError, match="L3"):
        config_from_dict(data)


@pytest.mark.parametrize("key,value", [("group_size", 1), ("clip_eps", 1.0), ("clip_eps", 0.0),
                                       ("kl_beta", -0.1), ("max_turn", 0), ("max_tool_calls", -1)])
def test_invariant_violations_name_the_key(key, value):
    with pytest.raises(ConfigError, match=key):
        config_from_dict(minimal_config_dict(**{key: value}))


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError, match="surprise"):
        config_from_dict(minimal_config_dict(surprise=1))
    data = minimal_config_dict()
    data["backends"]["L1"]["colour"] = "red"
    with pytest.raises(ConfigError, match="colour"):
        config_from_dict(data)


def test_backend_max_tokens_bounded_by_config():
    data = minimal_config_dict(max_tokens=100)
    data["backends"]["L2"]["max_tokens"] = 200
    with pytest.raises(ConfigError, match="max_tokens"):
        config_from_dict(data)


def test_unreadable_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


@given(group_size=st.integers(2, 64), clip=st.floats(0.01, 0.99), beta=st.floats(0, 1),
       calls=st.integers(0, 10), turns=st.integers(1, 20), params=st.floats(0, 700))
def test_config_round_trip_is_fixed_point(group_size, clip, beta, calls, turns, params):
    data = minimal_config_dict(group_size=group_size, clip_eps=clip, kl_beta=beta,
                               max_tool_calls=calls, max_turn=turns)
    data["backends"]["L4"]["params_b"] = params
    once = config_to_dict(config_from_dict(data))
    assert config_to_dict(config_from_dict(once)) == once


def test_config_is_immutable():
    cfg = default_config()
    with pytest.raises(AttributeError):
        cfg.group_size = 3  # type: ignore[misc]
    with pytest.raises(TypeError):
        cfg.backends[ComplexityLevel.L1] = None  # type: ignore[index]
    assert isinstance(cfg.agent_backend(), BackendProfile)
    assert isinstance(cfg, GatewayConfig)
