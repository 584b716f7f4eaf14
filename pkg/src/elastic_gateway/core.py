"""Shared domain types, cost model and configuration loading."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping


class ConfigError(ValueError):
    """Invalid or unreadable gateway configuration."""


class ComplexityLevel(enum.IntEnum):
    L1 = 1
    L2 = 2
    L3 = 3
    L4 = 4

    @property
    def ordinal(self) -> int:
        return int(self)

    @classmethod
    def parse(cls, value: "str | int | ComplexityLevel") -> "ComplexityLevel":
        """Accept ``3``, ``"3"``, ``"L3"`` or ``"l3"``."""
        if isinstance(value, ComplexityLevel):
            return value
        if isinstance(value, str):
            text = value.strip().upper()
            if text.startswith("L"):
                text = text[1:]
            if not text.isdigit():
                raise ValueError(f"not a complexity level: {value!r}")
            value = int(text)
        if isinstance(value, bool) or value not in (1, 2, 3, 4):
            raise ValueError(f"not a complexity level: {value!r}")
        return cls(value)

    def __str__(self) -> str:
        return self.name


class RoutingAction(enum.Enum):
    NO_THINK = "NoThink"
    THINK = "Think"
    EXTEND = "Extend"
    DELEGATE = "Delegate"

    def __str__(self) -> str:
        return self.value


_LEVEL_TO_ACTION = {
    ComplexityLevel.L1: RoutingAction.NO_THINK,
    ComplexityLevel.L2: RoutingAction.THINK,
    ComplexityLevel.L3: RoutingAction.EXTEND,
    ComplexityLevel.L4: RoutingAction.DELEGATE,
}
_ACTION_TO_LEVEL = {a: lvl for lvl, a in _LEVEL_TO_ACTION.items()}


def level_to_action(level: ComplexityLevel | int) -> RoutingAction:
    return _LEVEL_TO_ACTION[ComplexityLevel(level)]


def action_to_level(action: RoutingAction) -> ComplexityLevel:
    return _ACTION_TO_LEVEL[action]


class TaskKind(enum.Enum):
    FREE_FORM = "FreeForm"
    MULTIPLE_CHOICE = "MultipleChoice"
    NUMERIC = "Numeric"

    @classmethod
    def parse(cls, value: "str | TaskKind") -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        key = value.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown task kind: {value!r}")


@dataclass(frozen=True)
class AnswerKey:
    canonical: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.canonical:
            raise ValueError("AnswerKey.canonical must be non-empty")
        object.__setattr__(self, "aliases", tuple(self.aliases))
        if len(set(self.aliases)) != len(self.aliases):
            raise ValueError("AnswerKey.aliases must be distinct")

    def candidates(self) -> tuple[str, ...]:
        return (self.canonical, *self.aliases)


@dataclass(frozen=True)
class Query:
    id: str
    text: str
    gold: AnswerKey | None = None
    task_kind: TaskKind = TaskKind.FREE_FORM

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("Query.text must be non-empty")


# Abstract compute units, scaled like a 7B / 32B / 32B-reasoning / 32B+tools ladder.
DEFAULT_COSTS = {
    RoutingAction.NO_THINK: 1.0,
    RoutingAction.THINK: 4.0,
    RoutingAction.EXTEND: 16.0,
    RoutingAction.DELEGATE: 24.0,
}
# Simulator priors only; never used to score real runs.
DEFAULT_QUALITY = {
    RoutingAction.NO_THINK: 0.6,
    RoutingAction.THINK: 0.75,
    RoutingAction.EXTEND: 0.85,
    RoutingAction.DELEGATE: 0.9,
}


@dataclass(frozen=True)
class CostModel:
    """Per-action compute cost and expected quality."""

    cost_per_action: Mapping[RoutingAction, float] = field(
        default_factory=lambda: dict(DEFAULT_COSTS))
    quality_per_action: Mapping[RoutingAction, float] = field(
        default_factory=lambda: dict(DEFAULT_QUALITY))

    def __post_init__(self) -> None:
        for action, cost in self.cost_per_action.items():
            if not isinstance(action, RoutingAction):
                raise ConfigError(f"cost_per_action key is not an action: {action!r}")
            if not math.isfinite(cost) or cost < 0:
                raise ConfigError(f"cost_per_action.{action.value} must be >= 0, got {cost}")
        for action, q in self.quality_per_action.items():
            if not 0.0 <= q <= 1.0:
                raise ConfigError(f"quality_per_action.{action.value} must lie in [0, 1], got {q}")
        object.__setattr__(self, "cost_per_action", MappingProxyType(dict(self.cost_per_action)))
        object.__setattr__(self, "quality_per_action", MappingProxyType(dict(self.quality_per_action)))

    def is_monotone(self) -> bool:
        costs = [self.cost_per_action.get(level_to_action(lvl)) for lvl in ComplexityLevel]
        if any(c is None for c in costs):
            return False
        return all(a <= b for a, b in zip(costs, costs[1:]))


def action_cost(model: CostModel, action: RoutingAction) -> float:
    try:
        return float(model.cost_per_action[action])
    except KeyError:
        raise ConfigError(f"cost model has no entry for action {action.value}") from None


def routing_objective(model: CostModel, actions) -> float:
    """Summed cost minus expected quality over a sequence of chosen actions (lower is better)."""
    return sum(action_cost(model, a) - model.quality_per_action[a] for a in actions)


@dataclass(frozen=True)
class BackendProfile:
    """One OpenAI-compatible chat backend serving a complexity level."""

    level: ComplexityLevel
    endpoint_url: str
    model_name: str
    max_tokens: int = 8192
    timeout: float = 120.0
    api_key_env: str | None = None
    params_b: float = 0.0

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ConfigError(f"{self.level}.max_tokens must be positive")
        if self.timeout <= 0:
            raise ConfigError(f"{self.level}.timeout must be positive")
        if self.params_b < 0:
            raise ConfigError(f"{self.level}.params_b must be >= 0")


_BACKEND_KEYS = {"endpoint_url", "model_name", "max_tokens", "timeout", "api_key_env", "params_b"}
_TOP_KEYS = {
    "backends", "max_tokens", "group_size", "clip_eps", "kl_beta", "learning_rate",
    "max_tool_calls", "max_turn", "cost_model",
}


@dataclass(frozen=True)
class GatewayConfig:
    backends: Mapping[ComplexityLevel, BackendProfile]
    max_tokens: int = 8192
    group_size: int = 12
    clip_eps: float = 0.2
    kl_beta: float = 0.04
    learning_rate: float = 5e-5
    max_tool_calls: int = 4
    max_turn: int = 8
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self) -> None:
        for lvl in ComplexityLevel:
            if lvl not in self.backends:
                raise ConfigError(f"backends: missing level {lvl.name}")
        for lvl, profile in self.backends.items():
            if profile.level != lvl:
                raise ConfigError(f"backends.{lvl.name}: profile declares level {profile.level.name}")
            if profile.max_tokens > self.max_tokens:
                raise ConfigError(
                    f"backends.{lvl.name}.max_tokens exceeds max_tokens ({profile.max_tokens} > {self.max_tokens})")
        if self.max_tokens <= 0:
            raise ConfigError("max_tokens must be positive")
        if self.group_size < 2:
            raise ConfigError(f"group_size must be >= 2, got {self.group_size}")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigError(f"clip_eps must lie in (0, 1), got {self.clip_eps}")
        if self.kl_beta < 0:
            raise ConfigError(f"kl_beta must be >= 0, got {self.kl_beta}")
        if not math.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.max_tool_calls < 0:
            raise ConfigError(f"max_tool_calls must be >= 0, got {self.max_tool_calls}")
        if self.max_turn < 1:
            raise ConfigError(f"max_turn must be >= 1, got {self.max_turn}")
        object.__setattr__(self, "backends", MappingProxyType(dict(self.backends)))

    def agent_backend(self) -> BackendProfile:
        """The classifier shares the L1 backend: it also answers L1 queries directly."""
        return self.backends[ComplexityLevel.L1]


def _expect(value: Any, kind, key: str):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{key}: expected integer, got {value!r}")
    if not isinstance(value, kind):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    return value


def _reject_unknown(data: Mapping, allowed: set[str], where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key {prefix}{unknown[0]}")


def _action_map(raw: Any, key: str) -> dict[RoutingAction, float]:
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected object")
    out = {}
    for name, value in raw.items():
        try:
            action = RoutingAction(name)
        except ValueError:
            raise ConfigError(f"unknown key {key}.{name}") from None
        out[action] = _expect(value, float, f"{key}.{name}")
    return out


def config_from_dict(data: Mapping[str, Any]) -> GatewayConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    raw_backends = data.get("backends")
    if not isinstance(raw_backends, dict):
        raise ConfigError("backends: required object mapping L1..L4 to backend profiles")
    backends = {}
    for name, raw in raw_backends.items():
        try:
            lvl = ComplexityLevel.parse(name)
        except ValueError:
            raise ConfigError(f"unknown key backends.{name}") from None
        where = f"backends.{lvl.name}"
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: expected object")
        _reject_unknown(raw, _BACKEND_KEYS, where)
        for req in ("endpoint_url", "model_name"):
            if req not in raw:
                raise ConfigError(f"{where}.{req}: required")
        api_key_env = raw.get("api_key_env")
        if api_key_env is not None:
            _expect(api_key_env, str, f"{where}.api_key_env")
        backends[lvl] = BackendProfile(
            level=lvl,
            endpoint_url=_expect(raw["endpoint_url"], str, f"{where}.endpoint_url"),
            model_name=_expect(raw["model_name"], str, f"{where}.model_name"),
            max_tokens=_expect(raw.get("max_tokens", 8192), int, f"{where}.max_tokens"),
            timeout=_expect(raw.get("timeout", 120.0), float, f"{where}.timeout"),
            api_key_env=api_key_env,
            params_b=_expect(raw.get("params_b", 0.0), float, f"{where}.params_b"),
        )
    missing = [lvl.name for lvl in ComplexityLevel if lvl not in backends]
    if missing:
        raise ConfigError(f"backends: missing level {missing[0]}")

    kwargs: dict[str, Any] = {}
    for key, kind in (("max_tokens", int), ("group_size", int), ("clip_eps", float),
                      ("kl_beta", float), ("learning_rate", float),
                      ("max_tool_calls", int), ("max_turn", int)):
        if key in data:
            kwargs[key] = _expect(data[key], kind, key)
    if "cost_model" in data:
        raw_cm = data["cost_model"]
        if not isinstance(raw_cm, dict):
            raise ConfigError("cost_model: expected object")
        _reject_unknown(raw_cm, {"cost_per_action", "quality_per_action"}, "cost_model")
        costs = dict(DEFAULT_COSTS)
        costs.update(_action_map(raw_cm.get("cost_per_action", {}), "cost_model.cost_per_action"))
        quality = dict(DEFAULT_QUALITY)
        quality.update(_action_map(raw_cm.get("quality_per_action", {}), "cost_model.quality_per_action"))
        kwargs["cost_model"] = CostModel(costs, quality)
    return GatewayConfig(backends=backends, **kwargs)


def config_to_dict(config: GatewayConfig) -> dict[str, Any]:
    backends = {}
    for lvl in ComplexityLevel:
        p = config.backends[lvl]
        entry: dict[str, Any] = {
            "endpoint_url": p.endpoint_url,
            "model_name": p.model_name,
            "max_tokens": p.max_tokens,
            "timeout": p.timeout,
            "params_b": p.params_b,
        }
        if p.api_key_env is not None:
            entry["api_key_env"] = p.api_key_env
        backends[lvl.name] = entry
    return {
        "backends": backends,
        "max_tokens": config.max_tokens,
        "group_size": config.group_size,
        "clip_eps": config.clip_eps,
        "kl_beta": config.kl_beta,
        "learning_rate": config.learning_rate,
        "max_tool_calls": config.max_tool_calls,
        "max_turn": config.max_turn,
        "cost_model": {
            "cost_per_action": {a.value: c for a, c in config.cost_model.cost_per_action.items()},
            "quality_per_action": {a.value: q for a, q in config.cost_model.quality_per_action.items()},
        },
    }


def load_config(path: str | Path) -> GatewayConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def dump_config(config: GatewayConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")


def default_config(base_url: str = "http://127.0.0.1:8000/v1/chat/completions") -> GatewayConfig:
    """Offline-friendly configuration mirroring a 7B agent and 32B tiers."""
    models = {
        ComplexityLevel.L1: ("router-7b", 7.0),
        ComplexityLevel.L2: ("instruct-32b", 32.0),
        ComplexityLevel.L3: ("reasoner-32b", 32.0),
        ComplexityLevel.L4: ("reasoner-32b-tools", 32.0),
    }
    backends = {
        lvl: BackendProfile(level=lvl, endpoint_url=base_url, model_name=name, params_b=size)
        for lvl, (name, size) in models.items()
    }
    return GatewayConfig(backends=backends)
