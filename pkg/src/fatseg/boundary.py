"""Skin contour, ray fan and first-transition boundary hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import cv2
import numpy as np
from scipy import ndimage as ndi


class NoSubjectError(ValueError):
    """The slice contains no foreground to trace."""


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed 8-connected pixel polyline, ``points[i] = (x, y)``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 2)
        if len(pts) < 3:
            raise NoSubjectError(f"contour needs >= 3 points, got {len(pts)}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def steps(self) -> np.ndarray:
        """Euclidean length of each closing step ``p[i] -> p[i+1]``."""
        d = np.roll(self.points, -1, axis=0) - self.points
        return np.hypot(d[:, 0], d[:, 1])

    def length(self) -> float:
        return float(self.steps().sum())

    def area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class RayFan:
    center: np.ndarray          # (2,) float, (x, y)
    starts: np.ndarray          # (n, 2) float skin points on the contour polyline
    directions: np.ndarray      # (n, 2) unit vectors toward the center
    lengths: np.ndarray         # (n,) skin-to-center distance
    step: float = 0.5

    def __len__(self):
        return len(self.starts)

    @property
    def angles(self) -> np.ndarray:
        """Polar angle of each skin point around the center."""
        rel = self.starts - self.center
        return np.arctan2(rel[:, 1], rel[:, 0])


def _empty(shape, dtype=float):
    return np.full(shape, np.nan, dtype=dtype) if dtype is float else np.zeros(shape, dtype=dtype)


@dataclass(frozen=True, eq=False)
class CandidateBoundary:
    """Boundary hypotheses, one row per ray that produced a transition.

    ``phi`` and ``pi`` hold the geometric and appearance outlier scores once
    they have been computed (NaN before).
    """

    ray_index: np.ndarray
    position: np.ndarray        # (n, 2) int pixel (x, y)
    skin_point: np.ndarray      # (n, 2) float (x, y) on the skin contour
    center: np.ndarray          # (2,) float
    phi: np.ndarray = field(default=None)
    pi: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.ray_index)
        object.__setattr__(self, "ray_index", np.asarray(self.ray_index, dtype=np.int64))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.int64).reshape(n, 2))
        object.__setattr__(self, "skin_point", np.asarray(self.skin_point, dtype=float).reshape(n, 2))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        for name in ("phi", "pi"):
            v = getattr(self, name)
            v = np.full(n, np.nan) if v is None else np.asarray(v, dtype=float)
            if v.shape != (n,):
                raise ValueError(f"{name} must have one value per candidate")
            object.__setattr__(self, name, v)

    def __len__(self):
        return len(self.ray_index)

    @property
    def radial_distance(self) -> np.ndarray:
        d = self.position - self.skin_point
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def angle(self) -> np.ndarray:
        rel = self.skin_point - self.center
        return np.arctan2(rel[:, 1], rel[:, 0])

    def subset(self, keep) -> "CandidateBoundary":
        keep = np.asarray(keep)
        return CandidateBoundary(
            self.ray_index[keep], self.position[keep], self.skin_point[keep],
            self.center, self.phi[keep], self.pi[keep],
        )

    def with_scores(self, phi=None, pi=None) -> "CandidateBoundary":
        return replace(
            self,
            phi=self.phi if phi is None else phi,
            pi=self.pi if pi is None else pi,
        )

    @classmethod
    def empty(cls, center=(np.nan, np.nan)) -> "CandidateBoundary":
        return cls(np.zeros(0, int), np.zeros((0, 2), int), np.zeros((0, 2)), center)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Background components not touching the border become foreground."""
    return ndi.binary_fill_holes(np.asarray(mask, dtype=bool))


def extract_skin_contour(mask: np.ndarray) -> Contour:
    """Outer contour with the most points on the hole-filled mask."""
    filled = fill_holes(mask)
    if not filled.any():
        raise NoSubjectError("mask has no foreground")
    contours, _ = cv2.findContours(filled.astype(np.uint8), cv2.RETR_LIST, cv2.CHAIN_APPROX_NONE)
    best = max(contours, key=len)
    return Contour(best.reshape(-1, 2))


def build_ray_fan(contour: Contour, n_rays: int = 360, step: float = 0.5) -> RayFan:
    """Rays from ``n_rays`` skin points, evenly spaced by arc length, to the
    centroid of the contour vertices."""
    if n_rays < 8:
        raise ValueError("n_rays must be >= 8")
    if step <= 0:
        raise ValueError("step must be positive")
    if abs(contour.area()) == 0:
        raise ValueError("degenerate contour with zero area")
    pts = contour.points.astype(float)
    center = pts.mean(axis=0)
    seg = contour.steps()
    arc = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    total = contour.length()
    targets = np.arange(n_rays) * (total / n_rays)
    # interpolate along the closed polyline so skin points are exactly arc-uniform
    idx = np.clip(np.searchsorted(arc, targets, side="right") - 1, 0, len(pts) - 1)
    nxt = np.roll(pts, -1, axis=0)[idx]
    frac = np.divide(targets - arc[idx], seg[idx], out=np.zeros(n_rays), where=seg[idx] > 0)
    starts = pts[idx] + frac[:, None] * (nxt - pts[idx])
    vec = center - starts
    lengths = np.hypot(vec[:, 0], vec[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        directions = np.where(lengths[:, None] > 0, vec / lengths[:, None], 0.0)
    return RayFan(center, starts, directions, lengths, float(step))


def sample_rays(fan: RayFan, shape) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-pixel sample coordinates along every ray.

    Returns ``(xi, yi, valid)`` arrays of shape ``(n_rays, n_samples)``;
    sample ``s`` of a ray sits at ``start + s * step * direction`` and is
    valid while strictly short of the center and inside the image.
    """
    ny, nx = shape
    n_samples = int(np.ceil(fan.lengths.max() / fan.step)) + 1 if len(fan) else 0
    t = np.arange(n_samples) * fan.step
    x = fan.starts[:, 0, None] + t[None, :] * fan.directions[:, 0, None]
    y = fan.starts[:, 1, None] + t[None, :] * fan.directions[:, 1, None]
    xi = np.floor(x + 0.5).astype(np.int64)
    yi = np.floor(y + 0.5).astype(np.int64)
    valid = (t[None, :] < fan.lengths[:, None]) & (xi >= 0) & (xi < nx) & (yi >= 0) & (yi < ny)
    return np.clip(xi, 0, nx - 1), np.clip(yi, 0, ny - 1), valid


def detect_transitions(fan: RayFan, fat_mask: np.ndarray, min_run: int = 2) -> CandidateBoundary:
    """First fat-to-non-fat change along each ray.

    A transition counts only when at least ``min_run`` consecutive fat samples
    precede the first non-fat sample. The candidate is the pixel of that
    first non-fat sample. Rays without such a transition give no candidate.
    """
    fat_mask = np.asarray(fat_mask, dtype=bool)
    if len(fan) == 0:
        return CandidateBoundary.empty(fan.center)
    xi, yi, valid = sample_rays(fan, fat_mask.shape)
    v = fat_mask[yi, xi] & valid
    nonfat = ~v & valid
    # run length of consecutive fat samples ending at each index
    run = np.zeros(v.shape, dtype=np.int64)
    acc = np.zeros(v.shape[0], dtype=np.int64)
    for s in range(v.shape[1]):
        acc = np.where(v[:, s], acc + 1, 0)
        run[:, s] = acc
    hit = np.zeros_like(v)
    hit[:, 1:] = nonfat[:, 1:] & (run[:, :-1] >= min_run)
    has = hit.any(axis=1)
    first = hit.argmax(axis=1)
    rays = np.nonzero(has)[0]
    s = first[rays]
    pos = np.stack([xi[rays, s], yi[rays, s]], axis=1)
    return CandidateBoundary(rays, pos, fan.starts[rays], fan.center)
