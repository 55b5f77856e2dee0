"""Appearance outlier scores: HOG -> correlation distance -> t-SNE -> LoOP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import CandidateBoundary
from .hog import HOG_DIM, hog_batch, pairwise_ncd
from .loop import LoopResult, loop_scores
from .tsne import Embedding2D, tsne_embed


@dataclass(frozen=True)
class AppearanceParams:
    perplexity: float | None = None     # None: min(30, (n - 1) // 3)
    iters: int = 1000
    k: int = 20
    lam: float = 3.0
    seed: int = 0
    space: str = "embedding"            # or "features": LoOP on the HOG distances

    def __post_init__(self):
        if self.space not in ("embedding", "features"):
            raise ValueError(f"space must be 'embedding' or 'features', got {self.space!r}")
        if self.k < 2:
            raise ValueError("LoOP k must be >= 2")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.iters < 1:
            raise ValueError("t-SNE iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class AppearanceResult:
    pi: np.ndarray
    hog: np.ndarray
    embedding: Embedding2D | None = None
    loop: LoopResult | None = None


def appearance_scores(slice_hu: np.ndarray, positions, params: AppearanceParams | None = None,
                      seed: int | None = None) -> AppearanceResult:
    """LoOP outlier probability per position.

    With fewer than ``k + 1`` positions there is not enough context and every
    probability is 0.
    """
    p = params or AppearanceParams()
    positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    n = len(positions)
    hog = hog_batch(slice_hu, positions) if n else np.zeros((0, HOG_DIM))
    if n < p.k + 1 or n < 4:
        return AppearanceResult(np.zeros(n), hog)
    dist = pairwise_ncd(hog)
    emb = tsne_embed(dist, perplexity=p.perplexity, iters=p.iters,
                     seed=p.seed if seed is None else seed)
    if p.space == "embedding":
        lr = loop_scores(emb.points, k=p.k, lam=p.lam)
    else:
        lr = loop_scores(dist, k=p.k, lam=p.lam, metric="precomputed")
    return AppearanceResult(lr.pi, hog, emb, lr)


def score_candidates(candidates: CandidateBoundary, slice_hu: np.ndarray,
                     params: AppearanceParams | None = None) -> CandidateBoundary:
    """Annotate every candidate with its appearance score; none are removed."""
    if len(candidates) == 0:
        raise ValueError("no candidates to score")
    res = appearance_scores(slice_hu, candidates.position, params)
    return candidates.with_scores(pi=res.pi)
