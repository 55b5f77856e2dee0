"""Fat thresholding and mask clean-up for single slices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi


@dataclass(frozen=True)
class PreprocessParams:
    hu_low: float = -190.0
    hu_high: float = -30.0
    disk_radius: int = 10
    median_window: int = 3

    def __post_init__(self):
        if not self.hu_low < self.hu_high:
            raise ValueError(f"hu_low ({self.hu_low}) must be below hu_high ({self.hu_high})")
        if self.disk_radius < 0:
            raise ValueError("disk_radius must be >= 0")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError("median_window must be odd and >= 1")


def threshold_fat(slice_hu: np.ndarray, params: PreprocessParams | None = None) -> np.ndarray:
    """Boolean mask of pixels inside the closed HU window ``[hu_low, hu_high]``."""
    p = params or PreprocessParams()
    slice_hu = np.asarray(slice_hu)
    if slice_hu.size == 0:
        raise ValueError("empty slice")
    return (slice_hu >= p.hu_low) & (slice_hu <= p.hu_high)


def disk(radius: int) -> np.ndarray:
    """Discrete disk ``{(u, v): u^2 + v^2 <= r^2}`` as a boolean footprint."""
    r = int(radius)
    u, v = np.mgrid[-r:r + 1, -r:r + 1]
    return u * u + v * v <= r * r


def morph_close_disk(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary closing by a discrete disk, with everything outside the image
    treated as background.

    Dilation and erosion are evaluated on a canvas padded by ``radius + 1`` so
    the result equals the closing of the mask embedded in an empty infinite
    plane, restricted back to the image. That keeps the operation extensive
    and idempotent at the borders. Both steps are exact distance thresholds on
    the Euclidean distance transform (integer squared distances compare
    exactly against ``radius**2`` after the square root).
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    mask = np.asarray(mask, dtype=bool)
    if radius == 0 or not mask.any():
        return mask.copy()
    pad = int(radius) + 1
    canvas = np.pad(mask, pad, mode="constant", constant_values=False)
    dilated = ndi.distance_transform_edt(~canvas) <= radius
    closed = ndi.distance_transform_edt(dilated) > radius
    return closed[pad:-pad, pad:-pad]


def median_filter(grid: np.ndarray, window: int = 3) -> np.ndarray:
    """Windowed median with edge replication at the borders.

    On boolean input this is a majority vote and a boolean mask is returned.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 1, got {window}")
    grid = np.asarray(grid)
    if grid.dtype == bool:
        return ndi.median_filter(grid.astype(np.uint8), size=window, mode="nearest").astype(bool)
    return ndi.median_filter(grid, size=window, mode="nearest")


def preprocess_slice(slice_hu: np.ndarray, params: PreprocessParams | None = None):
    """Threshold, close, then median-filter one slice.

    Returns ``(fat, smooth)``: the raw thresholded fat mask (used for
    quantification) and the cleaned mask used to locate the skin contour and
    the boundary transitions.
    """
    p = params or PreprocessParams()
    if np.ndim(slice_hu) != 2:
        raise ValueError(f"expected a 2-D slice, got shape {np.shape(slice_hu)}")
    fat = threshold_fat(slice_hu, p)
    smooth = median_filter(morph_close_disk(fat, p.disk_radius), p.median_window)
    return fat, smooth
