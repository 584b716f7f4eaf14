"""Independent reference implementations used by the tests."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from elastic_gateway.grpo import PolicyParams, RolloutGroup, policy_probs

# --- calculator: random expression trees, rendered to text and walked directly ---

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "%": 2, "neg": 3, "^": 4}
LEAF = 5


@dataclass(frozen=True)
class Node:
    op: str  # "num", "neg", "+", "-", "*", "/", "%", "^", or a function name
    args: tuple = ()
    value: float = 0.0


def prec(node: Node) -> int:
    return _PREC.get(node.op, LEAF)


def walk(node: Node) -> float:
    """Evaluate a tree with plain Python arithmetic; raises ArithmeticError/ValueError on bad input."""
    op = node.op
    if op == "num":
        return node.value
    vals = [walk(a) for a in node.args]
    if op == "neg":
        out = -vals[0]
    elif op == "+":
        out = vals[0] + vals[1]
    elif op == "-":
        out = vals[0] - vals[1]
    elif op == "*":
        out = vals[0] * vals[1]
    elif op == "/":
        out = vals[0] / vals[1]
    elif op == "%":
        if vals[1] == 0:
            raise ZeroDivisionError
        out = math.fmod(vals[0], vals[1])
    elif op == "^":
        if vals[0] == 0 and vals[1] < 0:
            raise ZeroDivisionError
        out = float(vals[0]) ** vals[1]
        if isinstance(out, complex):
            raise ValueError
    elif op == "sqrt":
        out = math.sqrt(vals[0])
    elif op == "abs":
        out = abs(vals[0])
    elif op == "min":
        out = min(vals)
    elif op == "max":
        out = max(vals)
    elif op == "mean":
        out = sum(vals) / len(vals)
    else:
        raise AssertionError(op)
    if not math.isfinite(out):
        raise OverflowError
    return out


def render(node: Node, rng: random.Random) -> str:
    """Text form using only the parentheses precedence requires, plus some random extras."""
    def wrap(child: Node, needed: bool) -> str:
        text = render(child, rng)
        return f"({text})" if needed or rng.random() < 0.15 else text

    op = node.op
    if op == "num":
        v = node.value
        return str(int(v)) if v == int(v) else repr(v)
    if op == "neg":
        return "-" + wrap(node.args[0], prec(node.args[0]) < 3)
    if op == "^":
        base, exp = node.args
        return wrap(base, prec(base) <= 4) + "^" + wrap(exp, prec(exp) < 3)
    if op in _PREC:
        p = _PREC[op]
        left, right = node.args
        space = " " if rng.random() < 0.5 else ""
        return f"{wrap(left, prec(left) < p)}{space}{op}{space}{wrap(right, prec(right) <= p)}"
    return f"{op}({', '.join(render(a, rng) for a in node.args)})"


def random_tree(rng: random.Random, depth: int = 0) -> Node:
    if depth >= 4 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return Node("num", value=float(rng.randint(0, 20)))
        return Node("num", value=round(rng.uniform(0, 10), rng.randint(1, 3)))
    kind = rng.choice(["+", "-", "*", "/", "%", "neg", "^", "sqrt", "abs", "min", "max", "mean"])
    if kind == "neg":
        return Node("neg", (random_tree(rng, depth + 1),))
    if kind == "^":
        exp = Node("num", value=float(rng.randint(0, 3)))
        if rng.random() < 0.3:
            exp = Node("neg", (exp,))
        return Node("^", (random_tree(rng, depth + 1), exp))
    if kind == "sqrt":
        return Node("sqrt", (Node("abs", (random_tree(rng, depth + 1),)),))
    if kind == "abs":
        return Node("abs", (random_tree(rng, depth + 1),))
    if kind in ("min", "max", "mean"):
        return Node(kind, tuple(random_tree(rng, depth + 1) for _ in range(rng.randint(1, 4))))
    return Node(kind, (random_tree(rng, depth + 1), random_tree(rng, depth + 1)))


def random_corpus(n: int, seed: int = 7) -> list[tuple[str, float]]:
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        tree = random_tree(rng)
        try:
            value = walk(tree)
        except (ArithmeticError, ValueError):
            continue
        out.append((render(tree, rng), value))
    return out


# --- GRPO: random rollout groups consistent with a behaviour policy ---

def random_params(rng: np.random.Generator, d: int, scale: float = 0.5) -> PolicyParams:
    return PolicyParams(rng.normal(scale=scale, size=(4, d)), rng.normal(scale=scale, size=4))


def perturb(params: PolicyParams, rng: np.random.Generator, scale: float) -> PolicyParams:
    return PolicyParams(params.weights + rng.normal(scale=scale, size=params.weights.shape),
                        params.bias + rng.normal(scale=scale, size=4))


def random_groups(old: PolicyParams, rng: np.random.Generator, n_groups: int, g: int) -> list[RolloutGroup]:
    groups = []
    for _ in range(n_groups):
        x = rng.normal(size=old.feature_dim)
        p = policy_probs(old, x)
        levels = rng.choice(4, size=g, p=p) + 1
        groups.append(RolloutGroup(x, tuple(levels), tuple(p[levels - 1]), tuple(rng.normal(size=g))))
    return groups


def flat(W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ravel(W), np.ravel(b)])


def finite_difference_gradient(fn, params: PolicyParams, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``fn(params)`` over every weight and bias entry."""
    theta = flat(params.weights, params.bias)
    d = params.feature_dim
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        f_up = fn(PolicyParams(up[:4 * d].reshape(4, d), up[4 * d:]))
        f_down = fn(PolicyParams(down[:4 * d].reshape(4, d), down[4 * d:]))
        grad[i] = (f_up - f_down) / (2 * h)
    return grad
