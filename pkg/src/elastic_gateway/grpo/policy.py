"""Linear-softmax router policy and the group-relative clipped objective."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import ComplexityLevel
from .kernels import log_softmax_rows, surrogate_and_grad

N_LEVELS = len(ComplexityLevel)
DEGENERATE_STD = 1e-8


class GRPOError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyParams:
    weights: np.ndarray  # (4, d)
    bias: np.ndarray  # (4,)

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != N_LEVELS or b.shape != (N_LEVELS,):
            raise GRPOError(f"policy shapes must be (4, d) and (4,), got {w.shape} and {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise GRPOError("policy parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, feature_dim: int) -> "PolicyParams":
        return cls(np.zeros((N_LEVELS, feature_dim)), np.zeros(N_LEVELS))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyParams":
        return cls(np.asarray(data["weights"]), np.asarray(data["bias"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PolicyParams":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RolloutGroup:
    """G level choices sampled for one query, with behaviour probabilities and rewards."""

    query_features: np.ndarray
    sampled_levels: tuple[ComplexityLevel, ...]
    old_probs: tuple[float, ...]
    rewards: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "query_features", np.asarray(self.query_features, dtype=np.float64))
        object.__setattr__(self, "sampled_levels", tuple(ComplexityLevel(l) for l in self.sampled_levels))
        object.__setattr__(self, "old_probs", tuple(float(p) for p in self.old_probs))
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        g = len(self.sampled_levels)
        if len(self.old_probs) != g or len(self.rewards) != g:
            raise GRPOError("sampled_levels, old_probs and rewards must have equal length")
        if any(not 0.0 < p <= 1.0 for p in self.old_probs):
            raise GRPOError("old probabilities must lie in (0, 1]; a zero probability has no ratio")

    @property
    def size(self) -> int:
        return len(self.sampled_levels)


def group_advantages(rewards: Sequence[float]) -> list[float]:
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise GRPOError("group advantages need at least two rewards")
    std = r.std()
    if std < DEGENERATE_STD:
        return [0.0] * r.size
    return ((r - r.mean()) / std).tolist()


def policy_probs(params: PolicyParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (params.feature_dim,):
        raise GRPOError(f"feature vector has shape {x.shape}, policy expects ({params.feature_dim},)")
    logits = params.weights @ x + params.bias
    return np.exp(log_softmax_rows(logits[None, :])[0])


def _per_group(params, old_params, ref_params, groups, eps, beta):
    if not 0.0 < eps < 1.0:
        raise GRPOError(f"clip epsilon must lie in (0, 1), got {eps}")
    if not groups:
        raise GRPOError("no rollout groups")
    for group in groups:
        if group.query_features.shape != (params.feature_dim,):
            raise GRPOError("group feature dimension does not match the policy")
        actions = np.array([[int(l) - 1 for l in group.sampled_levels]])
        old_p = np.array([group.old_probs])
        # The recorded behaviour probabilities must come from old_params.
        expected = policy_probs(old_params, group.query_features)[actions[0]]
        if not np.allclose(old_p[0], expected, rtol=1e-9, atol=1e-12):
            raise GRPOError("group old_probs were not produced by old_params")
        adv = np.array([group_advantages(group.rewards)])
        yield surrogate_and_grad(
            group.query_features[None, :], actions, old_p, adv,
            params.weights, params.bias, ref_params.weights, ref_params.bias, eps, beta)


def surrogate_objective(params: PolicyParams, old_params: PolicyParams, ref_params: PolicyParams,
                        groups: Sequence[RolloutGroup], eps: float, beta: float) -> float:
    values = [obj for obj, _, _ in _per_group(params, old_params, ref_params, groups, eps, beta)]
    return float(np.mean(values))


def surrogate_gradient(params: PolicyParams, old_params: PolicyParams, ref_params: PolicyParams,
                       groups: Sequence[RolloutGroup], eps: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``surrogate_objective`` w.r.t. (weights, bias)."""
    gW = np.zeros_like(params.weights)
    gb = np.zeros_like(params.bias)
    n = 0
    for _, dW, db in _per_group(params, old_params, ref_params, groups, eps, beta):
        gW += dW
        gb += db
        n += 1
    return gW / n, gb / n
