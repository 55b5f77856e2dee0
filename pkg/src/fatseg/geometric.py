"""Geometric outlier scores from the skin-to-boundary distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import CandidateBoundary

MAD_THRESHOLD = 2.5


@dataclass(frozen=True, eq=False)
class MadResult:
    phi: np.ndarray
    median_distance: float
    mad: float
    threshold: float = MAD_THRESHOLD

    @property
    def inlier(self) -> np.ndarray:
        return self.phi <= self.threshold


def mad_scores(candidates, threshold: float = MAD_THRESHOLD) -> MadResult:
    """Deviation of each distance from the median, in units of the median
    absolute deviation (no normal-consistency factor).

    ``candidates`` is a :class:`CandidateBoundary` or a plain sequence of
    distances. When the MAD is zero every score is defined as 0.
    """
    d = candidates.radial_distance if isinstance(candidates, CandidateBoundary) else np.asarray(candidates, float)
    if len(d) < 3:
        raise ValueError(f"need at least 3 candidates, got {len(d)}")
    med = np.median(d)
    dev = np.abs(d - med)
    mad = np.median(dev)
    if mad == 0:
        phi = np.zeros_like(dev)
    else:
        phi = dev / mad
    return MadResult(phi, float(med), float(mad), threshold)


def filter_by_mad(candidates: CandidateBoundary, result: MadResult,
                  threshold: float | None = None) -> CandidateBoundary:
    """Keep candidates with ``phi <= threshold``; every kept row carries its phi.

    Rejected rows are recoverable from the annotated input via
    ``candidates.with_scores(phi=result.phi).subset(phi > threshold)``.
    """
    if len(result.phi) != len(candidates):
        raise ValueError("MAD result is not aligned with the candidates")
    thr = result.threshold if threshold is None else threshold
    scored = candidates.with_scores(phi=result.phi)
    return scored.subset(result.phi <= thr)
