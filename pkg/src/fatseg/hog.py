"""Reduced 279-dimensional HOG descriptor around a point.

Layout: a 32x32 patch split into a 3x3 grid of 14x14 cells with a 9-pixel
stride (5 pixels of overlap between neighbouring cells). Each cell yields 31
values in the reduced-HOG style: 18 contrast-sensitive orientation bins, 9
contrast-insensitive bins and 4 texture (gradient energy) terms, one per
2x2-cell normalization block. 9 cells x 31 = 279.
"""

from __future__ import annotations

import numpy as np

PATCH = 32
CELL = 14
STRIDE = 9
GRID = 3
N_SIGNED = 18
N_UNSIGNED = 9
N_BLOCKS = 4
CELL_DIM = N_SIGNED + N_UNSIGNED + N_BLOCKS
HOG_DIM = GRID * GRID * CELL_DIM

TRUNCATE = 0.2
TEXTURE_SCALE = 0.2357
EPS = 1e-12

_BLOCKS = [(0, 0), (0, 1), (1, 0), (1, 1)]


def extract_patches(slice_hu: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, 34, 34) float patches: the 32x32 window plus a one-pixel ring for
    central differences. Rows ``y-17 .. y+16``, edge-replicated off-image."""
    img = np.asarray(slice_hu, dtype=float)
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, 2)
    half = PATCH // 2 + 1
    padded = np.pad(img, half, mode="edge")
    off = np.arange(PATCH + 2)
    rows = centers[:, 1, None] + off[None, :]   # padded coords: y - half + half
    cols = centers[:, 0, None] + off[None, :]
    return padded[rows[:, :, None], cols[:, None, :]]


def _gradients(patches: np.ndarray):
    gx = 0.5 * (patches[:, 1:-1, 2:] - patches[:, 1:-1, :-2])
    gy = 0.5 * (patches[:, 2:, 1:-1] - patches[:, :-2, 1:-1])
    return gx, gy


def cell_histograms(patches: np.ndarray) -> np.ndarray:
    """Signed orientation histograms, shape (n, 3, 3, 18).

    Magnitude votes are split linearly between the two nearest bins; bin k is
    centred on ``k * 20`` degrees.
    """
    patches = np.asarray(patches, dtype=float)
    n = patches.shape[0]
    gx, gy = _gradients(patches)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    pos = theta * (N_SIGNED / (2 * np.pi))
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    lo = lo % N_SIGNED
    hi = (lo + 1) % N_SIGNED
    w_lo = mag * (1.0 - frac)
    w_hi = mag * frac
    base = np.arange(n)[:, None, None] * N_SIGNED
    hist = np.empty((n, GRID, GRID, N_SIGNED))
    for i in range(GRID):
        for j in range(GRID):
            sl = (slice(None), slice(i * STRIDE, i * STRIDE + CELL), slice(j * STRIDE, j * STRIDE + CELL))
            h = np.bincount((base + lo[sl]).ravel(), weights=w_lo[sl].ravel(), minlength=n * N_SIGNED)
            h += np.bincount((base + hi[sl]).ravel(), weights=w_hi[sl].ravel(), minlength=n * N_SIGNED)
            hist[:, i, j] = h.reshape(n, N_SIGNED)
    return hist


def block_norms(unsigned: np.ndarray) -> np.ndarray:
    """L2 norm of the unsigned histograms over each 2x2-cell block, (n, 4)."""
    energy = (unsigned ** 2).sum(axis=-1)
    return np.stack(
        [np.sqrt(energy[:, bi:bi + 2, bj:bj + 2].sum(axis=(1, 2)) + EPS) for bi, bj in _BLOCKS],
        axis=1,
    )


def hog_from_patches(patches: np.ndarray) -> np.ndarray:
    """Descriptors for a stack of (34, 34) patches, shape (n, 279)."""
    patches = np.asarray(patches, dtype=float)
    if patches.ndim == 2:
        patches = patches[None]
    if patches.shape[1:] != (PATCH + 2, PATCH + 2):
        raise ValueError(f"patches must be {PATCH + 2}x{PATCH + 2}")
    signed = cell_histograms(patches)
    unsigned = signed[..., :N_UNSIGNED] + signed[..., N_UNSIGNED:]
    norms = block_norms(unsigned)[:, None, None, :, None]       # (n,1,1,4,1)
    ts = np.minimum(signed[..., None, :] / norms, TRUNCATE)      # (n,3,3,4,18)
    tu = np.minimum(unsigned[..., None, :] / norms, TRUNCATE)    # (n,3,3,4,9)
    feat = np.concatenate(
        [0.5 * ts.sum(axis=3), 0.5 * tu.sum(axis=3), TEXTURE_SCALE * tu.sum(axis=4)],
        axis=-1,
    )
    return feat.reshape(len(patches), HOG_DIM)


def hog_batch(slice_hu: np.ndarray, centers) -> np.ndarray:
    """HOG descriptors at each ``(x, y)`` center on the raw HU slice."""
    centers = np.asarray(centers, dtype=np.int64).reshape(-1, 2)
    if len(centers) == 0:
        return np.zeros((0, HOG_DIM))
    return hog_from_patches(extract_patches(slice_hu, centers))


def hog_at(slice_hu: np.ndarray, center) -> np.ndarray:
    return hog_batch(slice_hu, [center])[0]


def pairwise_ncd(features: np.ndarray) -> np.ndarray:
    """Normalized correlation distance ``1 - pearson(x, y)``.

    Rows with zero variance are at distance 1 from every other row.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need at least two feature vectors")
    Z = X - X.mean(axis=1, keepdims=True)
    norm = np.sqrt((Z * Z).sum(axis=1))
    flat = norm == 0
    Z = np.divide(Z, norm[:, None], out=np.zeros_like(Z), where=~flat[:, None])
    corr = Z @ Z.T
    corr = 0.5 * (corr + corr.T)
    D = np.clip(1.0 - corr, 0.0, 2.0)
    D[flat, :] = 1.0
    D[:, flat] = 1.0
    np.fill_diagonal(D, 0.0)
    return D
