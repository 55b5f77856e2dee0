"""Convex hull of the visceral boundary, SAT/VAT split and volumes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .volume_io import Label, MaskGrid


class DegenerateHullError(ValueError):
    """Fewer than three non-collinear points."""


@dataclass(frozen=True, eq=False)
class HullPolygon:
    vertices: np.ndarray    # (h, 2), counterclockwise, no repeated endpoint

    def area(self) -> float:
        x, y = self.vertices[:, 0].astype(float), self.vertices[:, 1].astype(float)
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Inside-or-on test for an (m, 2) array of points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        a = self.vertices.astype(float)
        b = np.roll(a, -1, axis=0)
        e = b - a
        rel_x = pts[:, None, 0] - a[None, :, 0]
        rel_y = pts[:, None, 1] - a[None, :, 1]
        cross = e[None, :, 0] * rel_y - e[None, :, 1] * rel_x
        return np.all(cross >= -tol, axis=1)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> HullPolygon:
    """Andrew's monotone chain. Collinear boundary points are dropped."""
    pts = sorted(set(map(tuple, np.asarray(points).reshape(-1, 2).tolist())))
    if len(pts) < 3:
        raise DegenerateHullError(f"need >= 3 distinct points, got {len(pts)}")
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("points are collinear")
    return HullPolygon(np.array(hull))


def hull_mask(hull: HullPolygon, shape) -> np.ndarray:
    """Pixels whose centers lie inside or on the hull."""
    ny, nx = shape
    out = np.zeros((ny, nx), dtype=bool)
    v = hull.vertices
    x0 = max(int(np.floor(v[:, 0].min())), 0)
    x1 = min(int(np.ceil(v[:, 0].max())), nx - 1)
    y0 = max(int(np.floor(v[:, 1].min())), 0)
    y1 = min(int(np.ceil(v[:, 1].max())), ny - 1)
    if x0 > x1 or y0 > y1:
        return out
    yy, xx = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    inside = np.ones(xx.shape, dtype=bool)
    a = v.astype(float)
    b = np.roll(a, -1, axis=0)
    for (ax, ay), (bx, by) in zip(a, b):
        inside &= (bx - ax) * (yy - ay) - (by - ay) * (xx - ax) >= -1e-9
    out[y0:y1 + 1, x0:x1 + 1] = inside
    return out


def partition_slice(fat_mask: np.ndarray, hull: HullPolygon | None) -> np.ndarray:
    """Label fat inside/on the hull VAT and the rest SAT; ``None`` means no VAT."""
    fat = np.asarray(fat_mask, dtype=bool)
    labels = np.zeros(fat.shape, dtype=np.uint8)
    labels[fat] = Label.SAT
    if hull is not None:
        labels[fat & hull_mask(hull, fat.shape)] = Label.VAT
    return labels


def hull_or_none(points) -> HullPolygon | None:
    try:
        return convex_hull(points)
    except DegenerateHullError:
        return None


@dataclass
class QuantReport:
    sat_ml: float
    vat_ml: float
    fat_ml: float
    slice_areas_mm2: list[dict] = field(default_factory=list)
    flagged_slices: list[int] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    timings_s: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sat_ml": self.sat_ml,
            "vat_ml": self.vat_ml,
            "fat_ml": self.fat_ml,
            "slice_areas_mm2": self.slice_areas_mm2,
            "flagged_slices": self.flagged_slices,
            "params": self.params,
            "timings_s": self.timings_s,
        }


def quantify(mask: MaskGrid, flagged_slices=(), params=None, timings=()) -> QuantReport:
    """Label volumes in ml (voxel count x dx*dy*dz / 1000) plus per-slice areas."""
    data = mask.data
    sp = mask.spacing
    counts = {lab: np.count_nonzero(data == lab, axis=(1, 2)) for lab in (Label.SAT, Label.VAT, Label.FAT)}
    areas = [
        {"z": z, "sat": float(counts[Label.SAT][z] * sp.pixel_mm2), "vat": float(counts[Label.VAT][z] * sp.pixel_mm2)}
        for z in range(data.shape[0])
    ]
    sat = int(counts[Label.SAT].sum()) * sp.voxel_ml
    vat = int(counts[Label.VAT].sum()) * sp.voxel_ml
    other = int(counts[Label.FAT].sum()) * sp.voxel_ml
    return QuantReport(
        sat_ml=sat, vat_ml=vat, fat_ml=sat + vat + other,
        slice_areas_mm2=areas, flagged_slices=sorted(int(z) for z in flagged_slices),
        params=dict(params or {}), timings_s=[float(t) for t in timings],
    )
