"""Local Outlier Probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

DENSITY_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class LoopResult:
    pi: np.ndarray          # outlier probability per point, in [0, 1]
    plof: np.ndarray
    nplof: float


def _distance_matrix(points: np.ndarray) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def knn(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other points per row; ties go to the lower index."""
    d = np.array(dist, dtype=float)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def loop_scores(points: np.ndarray, k: int = 20, lam: float = 3.0,
                metric: str = "euclidean") -> LoopResult:
    """Outlier probability of each point relative to its k-neighbourhood.

    ``points`` is an (n, d) array, or an (n, n) distance matrix when
    ``metric="precomputed"``.
    """
    if metric == "precomputed":
        dist = np.asarray(points, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("precomputed distances must be square")
    elif metric == "euclidean":
        dist = _distance_matrix(points)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    n = len(dist)
    if not 2 <= k < n:
        raise ValueError(f"need n > k >= 2, got n={n}, k={k}")
    nbrs = knn(dist, k)
    nd = np.take_along_axis(dist, nbrs, axis=1)
    sigma = np.sqrt((nd * nd).sum(axis=1) / k)
    pdist = lam * sigma
    expected = np.maximum(pdist[nbrs].mean(axis=1), DENSITY_FLOOR)
    plof = pdist / expected - 1.0
    nplof = lam * float(np.sqrt(np.mean(plof * plof)))
    if nplof == 0:
        pi = np.zeros(n)
    else:
        pi = np.maximum(0.0, erf(plof / (np.sqrt(2.0) * nplof)))
    return LoopResult(pi, plof, nplof)
