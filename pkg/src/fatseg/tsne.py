"""Exact t-SNE on a precomputed distance matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

P_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Embedding2D:
    points: np.ndarray      # (n, 2)
    kl_trace: np.ndarray    # KL(P || Q) at the sweeps listed in kl_sweeps
    kl_sweeps: np.ndarray   # sweep index of each trace entry; 0 = initialisation

    @property
    def kl_initial(self) -> float:
        return float(self.kl_trace[0])

    @property
    def kl_final(self) -> float:
        return float(self.kl_trace[-1])


def default_perplexity(n: int) -> float:
    return float(min(30, (n - 1) // 3))


def conditional_affinities(sq_dist: np.ndarray, perplexity: float,
                           tol: float = 1e-5, max_iter: int = 200) -> np.ndarray:
    """Row-wise Gaussian affinities whose entropy matches ``log(perplexity)``.

    Precisions are found by bisection, all rows at once.
    """
    n = len(sq_dist)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.full(n, 0.0)
    hi = np.full(n, np.inf)
    off = ~np.eye(n, dtype=bool)
    D = np.where(off, sq_dist, 0.0)
    # subtract the row minimum so exp() cannot underflow to an all-zero row
    dmin = np.where(off, sq_dist, np.inf).min(axis=1, keepdims=True)
    Dshift = np.where(off, D - dmin, 0.0)
    for _ in range(max_iter):
        W = np.where(off, np.exp(-Dshift * beta[:, None]), 0.0)
        sw = W.sum(axis=1)
        P = W / sw[:, None]
        H = np.log(sw) + beta * (P * Dshift).sum(axis=1)
        diff = H - target
        active = np.abs(diff) >= tol
        if not active.any():
            break
        up = active & (diff > 0)        # entropy too high: sharpen
        down = active & (diff < 0)
        lo = np.where(up, beta, lo)
        hi = np.where(down, beta, hi)
        beta = np.where(up, np.where(np.isinf(hi), beta * 2.0, 0.5 * (beta + hi)), beta)
        beta = np.where(down, 0.5 * (beta + lo), beta)
    return P


def joint_affinities(distances: np.ndarray, perplexity: float) -> np.ndarray:
    D = np.asarray(distances, dtype=float)
    P = conditional_affinities(D * D, perplexity)
    P = (P + P.T) / (2.0 * len(D))
    return np.maximum(P, P_FLOOR)


def _sq_dists(Y: np.ndarray) -> np.ndarray:
    diff = Y[:, None, :] - Y[None, :, :]
    return (diff * diff).sum(axis=2)


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    num = 1.0 / (1.0 + _sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), P_FLOOR)
    off = ~np.eye(len(P), dtype=bool)
    return float((P[off] * np.log(P[off] / Q[off])).sum())


@njit(cache=True)
def _sweep(Y, P, exaggeration, with_kl):
    """One pass over point pairs: gradient of KL(P || Q), normaliser Z and,
    optionally, sum P_ij log(num_ij) for the KL value."""
    n = Y.shape[0]
    attract = np.zeros((n, 2))
    repulse = np.zeros((n, 2))
    Z = 0.0
    p_log_num = 0.0
    for i in range(n):
        yi0 = Y[i, 0]
        yi1 = Y[i, 1]
        for j in range(i + 1, n):
            d0 = yi0 - Y[j, 0]
            d1 = yi1 - Y[j, 1]
            d2 = d0 * d0 + d1 * d1
            num = 1.0 / (1.0 + d2)
            Z += 2.0 * num
            a = exaggeration * P[i, j] * num
            r = num * num
            attract[i, 0] += a * d0
            attract[i, 1] += a * d1
            attract[j, 0] -= a * d0
            attract[j, 1] -= a * d1
            repulse[i, 0] += r * d0
            repulse[i, 1] += r * d1
            repulse[j, 0] -= r * d0
            repulse[j, 1] -= r * d1
            if with_kl:
                p_log_num -= 2.0 * P[i, j] * np.log1p(d2)
    grad = 4.0 * (attract - repulse / Z)
    return grad, Z, p_log_num


def tsne_embed(distances: np.ndarray, perplexity: float | None = None, iters: int = 1000,
               seed: int = 0, learning_rate: float = 100.0, exaggeration: float = 4.0,
               exaggeration_iters: int = 100, momentum: tuple[float, float] = (0.5, 0.8),
               momentum_switch: int = 250, min_gain: float = 0.01,
               kl_every: int = 10) -> Embedding2D:
    """Embed points into 2D by gradient descent on KL(P || Q).

    Low-dimensional affinities use the Student-t kernel ``1 / (1 + |qi - qj|^2)``.
    Optimisation follows the usual recipe: early exaggeration, momentum
    switch and per-parameter adaptive gains.

    The KL divergence is recorded at initialisation, every ``kl_every``
    sweeps and after the last sweep; evaluating it costs a logarithm per pair,
    several times the price of the gradient itself.
    """
    D = np.asarray(distances, dtype=float)
    n = len(D)
    if D.shape != (n, n):
        raise ValueError("distances must be a square matrix")
    if not np.all(np.isfinite(D)):
        raise ValueError("distances must be finite")
    if n < 4:
        raise ValueError("t-SNE needs at least 4 points")
    if perplexity is None:
        perplexity = default_perplexity(n)
    if not 0 < perplexity < n:
        raise ValueError(f"perplexity must be in (0, n={n}), got {perplexity}")

    P = joint_affinities(D, perplexity)
    off = ~np.eye(n, dtype=bool)
    p_entropy = float((P[off] * np.log(P[off])).sum())

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    kl_every = max(int(kl_every), 1)
    trace, sweeps = [], []

    p_total = float(P[off].sum())
    for it in range(iters + 1):
        exag = exaggeration if it < exaggeration_iters else 1.0
        record = it % kl_every == 0 or it == iters
        grad, Z, p_log_num = _sweep(Y, P, exag, record)
        if record:
            # KL = sum P log P - sum P log(num / Z)
            trace.append(p_entropy - p_log_num + p_total * np.log(Z))
            sweeps.append(it)
        if it == iters:
            break
        mom = momentum[0] if it < momentum_switch else momentum[1]
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, min_gain)
        update = mom * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    return Embedding2D(Y, np.array(trace), np.array(sweeps))
