"""Time the numba and numpy GRPO surrogate kernels on identical inputs.

    python benchmarks/bench_grpo_kernels.py [--batch 24] [--group 12] [--dim 8] [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from elastic_gateway.grpo import _accel
from elastic_gateway.grpo.kernels import surrogate_and_grad_numba, surrogate_and_grad_numpy


def make_inputs(batch: int, group: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(batch, dim))
    W, b = rng.normal(scale=0.3, size=(4, dim)), rng.normal(scale=0.3, size=4)
    Wo, bo = W + rng.normal(scale=0.05, size=W.shape), b + rng.normal(scale=0.05, size=4)
    Z = X @ Wo.T + bo
    P = np.exp(Z - Z.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    actions = np.stack([rng.choice(4, size=group, p=p) for p in P])
    old_p = np.take_along_axis(P, actions, axis=1)
    R = rng.normal(size=(batch, group))
    adv = (R - R.mean(1, keepdims=True)) / R.std(1, keepdims=True)
    return (X, actions.astype(np.int64), old_p, adv, W, b, np.zeros_like(W), np.zeros(4), 0.2, 0.04)


def best_of(fn, args, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--batch", type=int, default=24)
    ap.add_argument("--group", type=int, default=12)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()

    inputs = make_inputs(args.batch, args.group, args.dim)
    o_np, gW_np, gb_np = surrogate_and_grad_numpy(*inputs)
    print(f"shape B={args.batch} G={args.group} d={args.dim}; numba importable: {_accel.HAVE_NUMBA}")
    t_np = best_of(surrogate_and_grad_numpy, inputs, args.repeats)
    print(f"numpy  {t_np * 1e6:10.1f} us/call")
    if not _accel.HAVE_NUMBA:
        return
    t0 = time.perf_counter()
    o_nb, gW_nb, gb_nb = surrogate_and_grad_numba(*inputs)
    print(f"numba  compile + first call {time.perf_counter() - t0:.2f} s")
    t_nb = best_of(surrogate_and_grad_numba, inputs, args.repeats)
    print(f"numba  {t_nb * 1e6:10.1f} us/call  (speed-up x{t_np / t_nb:.1f})")
    diff = max(abs(o_np - o_nb), float(np.abs(gW_np - gW_nb).max()), float(np.abs(gb_np - gb_nb).max()))
    print(f"max abs difference between paths: {diff:.2e}")


if __name__ == "__main__":
    main()
