"""Synthetic query environment for training and checking the router policy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ComplexityLevel


@dataclass(frozen=True)
class SimEnvSpec:
    """Queries are noisy draws around one cluster mean per minimal level."""

    feature_dim: int
    level_priors: tuple[float, float, float, float]
    cluster_means: np.ndarray = field(repr=False)  # (4, d)
    noise_sigma: float
    success_prob_at_or_above: float = 0.95
    success_prob_below: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        priors = np.asarray(self.level_priors, dtype=np.float64)
        means = np.array(self.cluster_means, dtype=np.float64)
        if self.feature_dim <= 0:
            raise ValueError("feature_dim must be positive")
        if priors.shape != (4,) or np.any(priors < 0) or not np.isclose(priors.sum(), 1.0):
            raise ValueError("level_priors must be 4 probabilities summing to 1")
        if means.shape != (4, self.feature_dim):
            raise ValueError(f"cluster_means must have shape (4, {self.feature_dim})")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        for name in ("success_prob_at_or_above", "success_prob_below"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        # Equality is allowed: it switches accuracy off for the ablation runs.
        if self.success_prob_at_or_above < self.success_prob_below:
            raise ValueError("success_prob_at_or_above must not be below success_prob_below")
        means.setflags(write=False)
        object.__setattr__(self, "level_priors", tuple(float(p) for p in priors))
        object.__setattr__(self, "cluster_means", means)

    @classmethod
    def separable(cls, feature_dim: int = 8, noise_sigma: float = 0.1, seed: int = 0,
                  **overrides) -> "SimEnvSpec":
        """Unit-vector cluster means on the first four axes, uniform level priors."""
        if feature_dim < 4:
            raise ValueError("separable environment needs feature_dim >= 4")
        means = np.zeros((4, feature_dim))
        means[np.arange(4), np.arange(4)] = 1.0
        kwargs = dict(feature_dim=feature_dim, level_priors=(0.25, 0.25, 0.25, 0.25),
                      cluster_means=means, noise_sigma=noise_sigma, seed=seed)
        kwargs.update(overrides)
        return cls(**kwargs)


def sample_query(env: SimEnvSpec, rng: np.random.Generator) -> tuple[np.ndarray, ComplexityLevel]:
    X, minimal = sample_queries(env, rng, 1)
    return X[0], ComplexityLevel(int(minimal[0]))


def sample_queries(env: SimEnvSpec, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised draw: features (n, d) and minimal levels (n,) as ints 1..4."""
    idx = rng.choice(4, size=n, p=np.asarray(env.level_priors))
    noise = rng.normal(0.0, env.noise_sigma, size=(n, env.feature_dim))
    return env.cluster_means[idx] + noise, idx + 1


def simulate_outcome(env: SimEnvSpec, minimal: int, selected: int, rng: np.random.Generator) -> bool:
    return bool(simulate_outcomes(env, np.array([minimal]), np.array([selected]), rng)[0])


def simulate_outcomes(env: SimEnvSpec, minimal: np.ndarray, selected: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    p = np.where(np.asarray(selected) >= np.asarray(minimal),
                 env.success_prob_at_or_above, env.success_prob_below)
    return rng.random(p.shape) < p
