"""Batched GRPO kernels for a linear-softmax categorical policy.

Every kernel has a vectorised numpy implementation and an explicit-loop
implementation compiled with numba. ``surrogate_and_grad`` and
``log_softmax_rows`` dispatch on ``_accel.USE_NUMBA``; both paths are exported
so they can be compared directly.

Shapes: ``X`` (B, d) features, ``actions`` (B, G) sampled action indices,
``old_p`` (B, G) behaviour probabilities of those actions, ``adv`` (B, G)
group-normalised advantages, ``W`` (K, d) and ``b`` (K,) policy parameters.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit


def log_softmax_rows_numpy(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@njit(cache=False)
def log_softmax_rows_numba(Z):
    n, k = Z.shape
    out = np.empty_like(Z)
    for r in range(n):
        m = Z[r, 0]
        for j in range(1, k):
            if Z[r, j] > m:
                m = Z[r, j]
        s = 0.0
        for j in range(k):
            s += math.exp(Z[r, j] - m)
        ls = math.log(s)
        for j in range(k):
            out[r, j] = Z[r, j] - m - ls
    return out


def surrogate_and_grad_numpy(X, actions, old_p, adv, W, b, Wr, br, eps, beta):
    B, G = actions.shape
    logP = log_softmax_rows_numpy(X @ W.T + b)
    logQ = log_softmax_rows_numpy(X @ Wr.T + br)
    P = np.exp(logP)
    kl = (P * (logP - logQ)).sum(axis=1)

    rows = np.arange(B)[:, None]
    rho = P[rows, actions] / old_p
    unclipped = rho * adv
    clipped = np.clip(rho, 1.0 - eps, 1.0 + eps) * adv
    surr = np.minimum(unclipped, clipped)
    objective = (surr.mean(axis=1) - beta * kl).mean()

    coef = np.where(unclipped <= clipped, adv * rho, 0.0) / G
    dZ = -coef.sum(axis=1)[:, None] * P
    np.add.at(dZ, (np.broadcast_to(rows, actions.shape), actions), coef)
    dZ -= beta * P * (logP - logQ - kl[:, None])
    dZ /= B
    return float(objective), dZ.T @ X, dZ.sum(axis=0)


@njit(cache=False)
def surrogate_and_grad_numba(X, actions, old_p, adv, W, b, Wr, br, eps, beta):
    B, d = X.shape
    G = actions.shape[1]
    K = W.shape[0]
    gW = np.zeros((K, d))
    gb = np.zeros(K)
    z = np.empty(K)
    zr = np.empty(K)
    lp = np.empty(K)
    lq = np.empty(K)
    p = np.empty(K)
    dz = np.empty(K)
    total = 0.0
    for q in range(B):
        for k in range(K):
            acc = b[k]
            accr = br[k]
            for j in range(d):
                acc += W[k, j] * X[q, j]
                accr += Wr[k, j] * X[q, j]
            z[k] = acc
            zr[k] = accr
        m = z[0]
        mr = zr[0]
        for k in range(1, K):
            if z[k] > m:
                m = z[k]
            if zr[k] > mr:
                mr = zr[k]
        s = 0.0
        sr = 0.0
        for k in range(K):
            s += math.exp(z[k] - m)
            sr += math.exp(zr[k] - mr)
        ls = math.log(s)
        lsr = math.log(sr)
        kl = 0.0
        for k in range(K):
            lp[k] = z[k] - m - ls
            lq[k] = zr[k] - mr - lsr
            p[k] = math.exp(lp[k])
            kl += p[k] * (lp[k] - lq[k])
        for k in range(K):
            dz[k] = -beta * p[k] * (lp[k] - lq[k] - kl)

        surr_sum = 0.0
        for i in range(G):
            a = actions[q, i]
            rho = p[a] / old_p[q, i]
            A = adv[q, i]
            lo = 1.0 - eps
            hi = 1.0 + eps
            rc = rho
            if rc < lo:
                rc = lo
            elif rc > hi:
                rc = hi
            u = rho * A
            c = rc * A
            if u <= c:
                surr_sum += u
                coef = A * rho / G
                for k in range(K):
                    dz[k] -= coef * p[k]
                dz[a] += coef
            else:
                surr_sum += c
        total += surr_sum / G - beta * kl
        for k in range(K):
            gb[k] += dz[k]
            for j in range(d):
                gW[k, j] += dz[k] * X[q, j]
    return total / B, gW / B, gb / B


def log_softmax_rows(Z: np.ndarray) -> np.ndarray:
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if _accel.USE_NUMBA:
        return log_softmax_rows_numba(Z)
    return log_softmax_rows_numpy(Z)


def surrogate_and_grad(X, actions, old_p, adv, W, b, Wr, br, eps, beta, use_numba=None):
    """Clipped group-relative surrogate with exact categorical KL, and its gradient.

    Returns ``(objective, dW, db)``; the objective is averaged over the B groups.
    """
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    args = (
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(actions, dtype=np.int64),
        np.ascontiguousarray(old_p, dtype=np.float64),
        np.ascontiguousarray(adv, dtype=np.float64),
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(Wr, dtype=np.float64),
        np.ascontiguousarray(br, dtype=np.float64),
        float(eps),
        float(beta),
    )
    if use_numba:
        obj, gW, gb = surrogate_and_grad_numba(*args)
        return float(obj), gW, gb
    return surrogate_and_grad_numpy(*args)


def group_advantages_rows(R: np.ndarray, degenerate_tol: float = 1e-8) -> np.ndarray:
    """Row-wise (r - mean) / population std; rows with std below tol map to zeros."""
    R = np.asarray(R, dtype=np.float64)
    mean = R.mean(axis=1, keepdims=True)
    std = R.std(axis=1, keepdims=True)
    safe = np.where(std < degenerate_tol, 1.0, std)
    return np.where(std < degenerate_tol, 0.0, (R - mean) / safe)


def backend_name() -> str:
    return "numba" if _accel.USE_NUMBA else "numpy"
