"""Binary CRF over boundary hypotheses, solved exactly by min-cut.

Energy of a labeling ``k``::

    E(k) = sum_i unary[i, k_i] + w * sum_{(i, j) in edges} scale_ij * [k_i != k_j]

with ``scale_ij = 1 / (1 + |f_i - f_j|_1)``. Each undirected edge is stored
once as ``i < j`` and counted once.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans

from .maxflow import FlowGraph

INLIER = 0
OUTLIER = 1
PROB_FLOOR = 1e-6
SOFTMAX_TEMPERATURE = 0.25
MAX_BRUTE_FORCE = 20


@dataclass(frozen=True, eq=False)
class FusionGraph:
    unary: np.ndarray       # (n, 2): cost of INLIER, OUTLIER per node
    edges: np.ndarray       # (m, 2) int, i < j
    scale: np.ndarray       # (m,) in (0, 1]
    w: float = 1.0

    def __post_init__(self):
        unary = np.asarray(self.unary, dtype=float).reshape(-1, 2)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        scale = np.asarray(self.scale, dtype=float).reshape(-1)
        if len(scale) != len(edges):
            raise ValueError("one scale per edge required")
        if not np.all(np.isfinite(unary)):
            raise ValueError("non-finite unary potentials")
        if not (np.isfinite(self.w) and self.w >= 0):
            raise ValueError("pairwise weight must be finite and >= 0")
        if len(edges) and (np.any(edges[:, 0] >= edges[:, 1]) or edges.max() >= len(unary)):
            raise ValueError("edges must be index pairs i < j within range")
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0) or np.any(scale > 1):
            raise ValueError("edge scales must lie in (0, 1]")
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "scale", scale)

    @property
    def n(self) -> int:
        return len(self.unary)

    def energy(self, labels) -> float:
        labels = np.asarray(labels, dtype=np.int64)
        u = self.unary[np.arange(self.n), labels].sum()
        if len(self.edges) == 0:
            return float(u)
        cut = labels[self.edges[:, 0]] != labels[self.edges[:, 1]]
        return float(u + self.w * self.scale[cut].sum())

    def pairwise_energy(self, labels) -> float:
        """``sum scale_ij [k_i != k_j]`` without the weight."""
        labels = np.asarray(labels, dtype=np.int64)
        if len(self.edges) == 0:
            return 0.0
        cut = labels[self.edges[:, 0]] != labels[self.edges[:, 1]]
        return float(self.scale[cut].sum())


@dataclass(frozen=True, eq=False)
class Labeling:
    labels: np.ndarray
    energy: float


def normalize_scores(phi, pi, phi_scale: float | None = None) -> np.ndarray:
    """Stack the two outlier scores as an (n, 2) array on [0, 1].

    Default is per-slice min-max scaling of each column. With ``phi_scale``
    set, phi is instead mapped by ``min(phi / phi_scale, 1)`` so its meaning
    does not depend on the worst outlier in the slice.
    """
    phi = np.asarray(phi, dtype=float)
    pi = np.asarray(pi, dtype=float)

    def minmax(v):
        lo, hi = v.min(), v.max()
        return np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)

    a = np.minimum(phi / phi_scale, 1.0) if phi_scale else minmax(phi)
    return np.stack([a, minmax(pi)], axis=1)


def cluster_probabilities(scores: np.ndarray, seed: int = 0, n_init: int = 10,
                          temperature: float = SOFTMAX_TEMPERATURE) -> np.ndarray:
    """P(INLIER), P(OUTLIER) per row from 2-means on the score vectors.

    The cluster whose centroid has the smaller norm is the inlier cluster.
    Probabilities are a softmax over negative centroid distances divided by
    ``temperature``. Fewer than two distinct rows gives 0.5 / 0.5.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    if n == 0:
        return np.zeros((0, 2))
    if len(np.unique(scores, axis=0)) < 2:
        return np.full((n, 2), 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        km = KMeans(n_clusters=2, n_init=n_init, random_state=seed).fit(scores)
    centers = km.cluster_centers_
    order = np.argsort(np.linalg.norm(centers, axis=1), kind="stable")
    centers = centers[order]                           # row 0 = inlier cluster
    d = np.linalg.norm(scores[:, None, :] - centers[None, :, :], axis=2)
    logits = -d / temperature
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def unary_from_probabilities(prob: np.ndarray, floor: float = PROB_FLOOR) -> np.ndarray:
    return -np.log(np.maximum(prob, floor))


def unary_potentials(phi, pi, seed: int = 0, phi_scale: float | None = None,
                     temperature: float = SOFTMAX_TEMPERATURE) -> np.ndarray:
    """Negative log cluster probabilities, (n, 2)."""
    scores = normalize_scores(phi, pi, phi_scale)
    return unary_from_probabilities(cluster_probabilities(scores, seed, temperature=temperature))


def fusion_features(hog: np.ndarray, radial_distance, angle) -> np.ndarray:
    """Concatenate the unit-L2 HOG vector with min-max radial distance and
    the ray angle as (cos, sin)."""
    hog = np.asarray(hog, dtype=float)
    norms = np.linalg.norm(hog, axis=1, keepdims=True)
    h = np.divide(hog, norms, out=np.zeros_like(hog), where=norms > 0)
    r = np.asarray(radial_distance, dtype=float)
    span = r.max() - r.min() if len(r) else 0.0
    r = (r - r.min()) / span if span > 0 else np.zeros_like(r)
    a = np.asarray(angle, dtype=float)
    return np.column_stack([h, r, np.cos(a), np.sin(a)])


def l1_distances(features: np.ndarray) -> np.ndarray:
    F = np.asarray(features, dtype=float)
    return cdist(F, F, metric="cityblock")


def build_edges(features: np.ndarray, k_nn: int = 5) -> np.ndarray:
    """Union of directed k-nearest-neighbour links under L1, as (m, 2) pairs
    with i < j. With ``n <= k_nn + 1`` the graph is complete."""
    F = np.asarray(features, dtype=float)
    n = len(F)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if n <= k_nn + 1:
        i, j = np.triu_indices(n, 1)
        return np.column_stack([i, j])
    D = l1_distances(F)
    np.fill_diagonal(D, np.inf)
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k_nn]
    src = np.repeat(np.arange(n), k_nn)
    dst = nbrs.ravel()
    pairs = np.column_stack([np.minimum(src, dst), np.maximum(src, dst)])
    return np.unique(pairs, axis=0)


def pairwise_potential(phi_i, phi_j, k_i: int, k_j: int) -> float:
    if k_i == k_j:
        return 0.0
    d = float(np.abs(np.asarray(phi_i, float) - np.asarray(phi_j, float)).sum())
    return 1.0 / (1.0 + d)


def edge_scales(features: np.ndarray, edges: np.ndarray) -> np.ndarray:
    F = np.asarray(features, dtype=float)
    if len(edges) == 0:
        return np.zeros(0)
    d = np.abs(F[edges[:, 0]] - F[edges[:, 1]]).sum(axis=1)
    return 1.0 / (1.0 + d)


def minimize_energy(graph: FusionGraph) -> Labeling:
    """Exact minimiser via one s-t minimum cut.

    Source side = INLIER. Terminal capacities are unary differences shifted to
    be non-negative; each edge becomes a pair of arcs of capacity
    ``w * scale``.
    """
    n = graph.n
    if n == 0:
        return Labeling(np.zeros(0, dtype=np.int64), 0.0)
    s, t = n, n + 1
    g = FlowGraph(n + 2)
    base = graph.unary.min(axis=1)
    for i in range(n):
        c_out = graph.unary[i, OUTLIER] - base[i]   # paid if i ends on the sink side
        c_in = graph.unary[i, INLIER] - base[i]     # paid if i stays on the source side
        if c_out > 0:
            g.add_edge(s, i, c_out)
        if c_in > 0:
            g.add_edge(i, t, c_in)
    if graph.w > 0:
        for (i, j), sc in zip(graph.edges.tolist(), graph.scale.tolist()):
            c = graph.w * sc
            g.add_edge(i, j, c, c)
    g.max_flow(s, t)
    side = g.source_side(s)
    labels = np.array([INLIER if side[i] else OUTLIER for i in range(n)], dtype=np.int64)
    return Labeling(labels, graph.energy(labels))


def brute_force_minimize(graph: FusionGraph) -> Labeling:
    """Enumerate all 2^n labelings; the first minimum in binary order wins."""
    n = graph.n
    if n > MAX_BRUTE_FORCE:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE}, got {n}")
    if n == 0:
        return Labeling(np.zeros(0, dtype=np.int64), 0.0)
    codes = np.arange(2 ** n, dtype=np.int64)
    best_e, best = np.inf, None
    chunk = 1 << 16
    for start in range(0, len(codes), chunk):
        c = codes[start:start + chunk]
        L = ((c[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
        e = graph.unary[np.arange(n)[None, :], L].sum(axis=1)
        if len(graph.edges):
            cut = L[:, graph.edges[:, 0]] != L[:, graph.edges[:, 1]]
            e = e + graph.w * (cut * graph.scale[None, :]).sum(axis=1)
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e, best = float(e[k]), L[k]
    return Labeling(best, graph.energy(best))
