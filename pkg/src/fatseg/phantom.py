"""Synthetic abdominal CT slices with exact SAT/VAT ground truth.

Each slice is a set of nested convex outlines around the grid center: skin,
subcutaneous fat, a thin muscle wall and the visceral cavity. The anterior
half of every outline is an ellipse and the posterior half a flatter
superellipse, so the cross-section is convex but not an ellipse. Optional
features reproduce the hard cases of real scans:

* wall gaps: angular sectors where the muscle wall is replaced by fat, so
  subcutaneous and visceral fat touch;
* subcutaneous cavities: soft-tissue inclusions inside the SAT layer that
  stop a boundary search early;
* visceral fat blobs scattered between the organs.

Ground truth labels every clean fat pixel VAT when it lies inside the wall
centerline and SAT otherwise, gap pixels included.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .volume_io import Label, MaskGrid, VolumeGrid, VoxelSpacing

WINDOW_HIGH = -30.0


@dataclass(frozen=True)
class PhantomParams:
    nx: int = 256
    ny: int = 256
    nz: int = 2
    spacing: tuple[float, float, float] = (1.17, 1.17, 5.0)
    skin_a: float = 105.0           # lateral semi-axis, px
    skin_b: float = 80.0            # anterior-posterior semi-axis, px
    posterior_exponent: float = 2.6
    skin_thickness: float = 2.0
    sat_lateral: float = 20.0
    sat_anterior: float = 18.0
    sat_posterior: float = 12.0
    wall_thickness: float = 4.0
    gap_count: int = 2
    gap_width_deg: float = 12.0
    vat_blob_count: int = 14
    vat_blob_radius: tuple[float, float] = (5.0, 11.0)
    vat_wall_margin: float = 0.0    # min gap between a blob and the inner wall
    cavity_count: int = 0
    cavity_radius: float = 11.0
    hu_air: float = -1000.0
    hu_fat: float = -100.0
    hu_muscle: float = 40.0
    hu_organ: float = 50.0
    noise_sigma: float = 15.0
    slice_scale_step: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("grid dimensions must be positive")
        for name in ("skin_thickness", "sat_lateral", "sat_anterior", "sat_posterior", "wall_thickness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.hu_air < self.hu_fat < WINDOW_HIGH < self.hu_muscle:
            raise ValueError("HU means must satisfy air < fat < -30 < muscle")
        if self.hu_organ <= WINDOW_HIGH:
            raise ValueError("organ HU must lie above the fat window")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if self.gap_count < 0 or self.vat_blob_count < 0 or self.cavity_count < 0:
            raise ValueError("feature counts must be >= 0")
        lo, hi = self.vat_blob_radius
        if not 0 < lo <= hi:
            raise ValueError("vat_blob_radius must be an increasing positive pair")


@dataclass(frozen=True)
class Outline:
    """Convex outline: ellipse anteriorly (y < 0), superellipse posteriorly."""

    a: float
    b_ant: float
    b_post: float
    n_post: float

    def level(self, x, y):
        post = y > 0
        b = np.where(post, self.b_post, self.b_ant)
        n = np.where(post, self.n_post, 2.0)
        return (np.abs(x) / self.a) ** n + (np.abs(y) / b) ** n

    def radius(self, theta):
        c, s = np.abs(np.cos(theta)), np.abs(np.sin(theta))
        post = np.sin(theta) > 0
        b = np.where(post, self.b_post, self.b_ant)
        n = np.where(post, self.n_post, 2.0)
        return ((c / self.a) ** n + (s / b) ** n) ** (-1.0 / n)

    def shrink(self, da, db_ant, db_post) -> "Outline":
        return Outline(self.a - da, self.b_ant - db_ant, self.b_post - db_post, self.n_post)


@dataclass(frozen=True)
class SliceGeometry:
    skin: Outline
    fat: Outline
    wall_outer: Outline
    wall_center: Outline
    wall_inner: Outline
    center: tuple[float, float]


def slice_geometry(p: PhantomParams, z: int) -> SliceGeometry:
    s = 1.0 + p.slice_scale_step * (z - (p.nz - 1) / 2.0)
    skin = Outline(p.skin_a * s, p.skin_b * s, p.skin_b * s, p.posterior_exponent)
    st = p.skin_thickness
    fat = skin.shrink(st, st, st)
    wall_outer = fat.shrink(p.sat_lateral * s, p.sat_anterior * s, p.sat_posterior * s)
    wt = p.wall_thickness
    wall_center = wall_outer.shrink(wt / 2, wt / 2, wt / 2)
    wall_inner = wall_outer.shrink(wt, wt, wt)
    if min(wall_inner.a, wall_inner.b_ant, wall_inner.b_post) <= 2:
        raise ValueError("layers do not leave room for a visceral cavity")
    cx, cy = (p.nx - 1) / 2.0, (p.ny - 1) / 2.0
    if skin.a + 1 > min(cx, p.nx - 1 - cx) or max(skin.b_ant, skin.b_post) + 1 > min(cy, p.ny - 1 - cy):
        raise ValueError("phantom does not fit the grid")
    return SliceGeometry(skin, fat, wall_outer, wall_center, wall_inner, (cx, cy))


def _angle_in_sectors(theta, centers, half_width):
    if len(centers) == 0:
        return np.zeros(np.shape(theta), dtype=bool)
    d = np.abs((theta[..., None] - np.asarray(centers)[None, :] + np.pi) % (2 * np.pi) - np.pi)
    return (d <= half_width).any(axis=-1)


def _layout(p: PhantomParams, rng: np.random.Generator):
    """Random positions shared by all slices of one phantom."""
    gaps = rng.uniform(0, 2 * np.pi, p.gap_count)
    cavities = np.column_stack([rng.uniform(0, 2 * np.pi, p.cavity_count), rng.uniform(0, 1, p.cavity_count)])
    blob_theta = rng.uniform(0, 2 * np.pi, p.vat_blob_count)
    blob_u = np.sqrt(rng.uniform(0.0, 1.0, p.vat_blob_count))
    blob_r = rng.uniform(*p.vat_blob_radius, p.vat_blob_count)
    return gaps, cavities, np.column_stack([blob_theta, blob_u, blob_r])


def render_slice(p: PhantomParams, z: int, layout) -> tuple[np.ndarray, np.ndarray]:
    """Clean HU image (float) and ground-truth labels for slice ``z``."""
    g = slice_geometry(p, z)
    gaps, cavities, blobs = layout
    cx, cy = g.center
    yy, xx = np.mgrid[0:p.ny, 0:p.nx].astype(float)
    x, y = xx - cx, yy - cy
    theta = np.arctan2(y, x)

    img = np.full((p.ny, p.nx), p.hu_air)
    in_skin = g.skin.level(x, y) <= 1
    in_fat = g.fat.level(x, y) <= 1
    in_wall_outer = g.wall_outer.level(x, y) <= 1
    in_wall_inner = g.wall_inner.level(x, y) <= 1
    img[in_skin] = p.hu_muscle
    img[in_fat] = p.hu_fat
    wall = in_wall_outer & ~in_wall_inner
    gap = _angle_in_sectors(theta, gaps, np.deg2rad(p.gap_width_deg) / 2)
    img[wall & ~gap] = p.hu_muscle
    img[in_wall_inner] = p.hu_organ

    for th, u, r in blobs:
        room = g.wall_inner.radius(th) - r - p.vat_wall_margin
        if room <= 0:
            continue
        rad = room * u
        bx, by = rad * np.cos(th), rad * np.sin(th)
        img[in_wall_inner & ((x - bx) ** 2 + (y - by) ** 2 <= r * r)] = p.hu_fat

    rc = p.cavity_radius
    for th, u in cavities:
        r_in = g.wall_outer.radius(th)
        r_out = g.fat.radius(th)
        room = r_out - r_in - 2 * rc - 4
        if room <= 0:
            continue
        rad = r_in + rc + 2 + u * room
        bx, by = rad * np.cos(th), rad * np.sin(th)
        img[in_fat & ~in_wall_outer & ((x - bx) ** 2 + (y - by) ** 2 <= rc * rc)] = p.hu_muscle

    fat = img == p.hu_fat
    truth = np.zeros((p.ny, p.nx), dtype=np.uint8)
    inner = g.wall_center.level(x, y) < 1
    truth[fat & ~inner] = Label.SAT
    truth[fat & inner] = Label.VAT
    return img, truth


def generate(params: PhantomParams | None = None) -> tuple[VolumeGrid, MaskGrid]:
    """Noisy CT volume and its ground-truth mask. Same params, same output."""
    p = params or PhantomParams()
    rng = np.random.default_rng(p.seed)
    layout = _layout(p, rng)
    vol = np.empty((p.nz, p.ny, p.nx), dtype=np.int16)
    truth = np.empty((p.nz, p.ny, p.nx), dtype=np.uint8)
    for z in range(p.nz):
        img, lab = render_slice(p, z, layout)
        if p.noise_sigma > 0:
            img = img + rng.normal(0.0, p.noise_sigma, img.shape)
        vol[z] = np.clip(np.floor(img + 0.5), -32768, 32767).astype(np.int16)
        truth[z] = lab
    spacing = VoxelSpacing(*p.spacing)
    return VolumeGrid(vol, spacing), MaskGrid(truth, spacing)


def clean_volume(params: PhantomParams) -> np.ndarray:
    """Noise-free HU volume for the same params (float)."""
    rng = np.random.default_rng(params.seed)
    layout = _layout(params, rng)
    return np.stack([render_slice(params, z, layout)[0] for z in range(params.nz)])


SUITE_SIZE = 20


def suite_params(seed: int = 42, noise_sigma: float = 15.0) -> list[PhantomParams]:
    """Parameters of the fixed 20-case battery.

    SAT thickness spans 5-40 px, wall gaps 0-6, lateral/AP ratio 1.0-1.6, and
    body size grows with SAT thickness, loosely mimicking a spread of BMI.
    """
    rng = np.random.default_rng(seed)
    thickness = np.linspace(5.0, 40.0, SUITE_SIZE)
    ratio = np.linspace(1.0, 1.6, SUITE_SIZE)[rng.permutation(SUITE_SIZE)]
    out = []
    for i in range(SUITE_SIZE):
        t = float(thickness[i])
        a = 85.0 + 0.8 * t
        b = a / float(ratio[i])
        cav_room = 0.9 * t >= 2 * 11.0 + 6
        out.append(PhantomParams(
            skin_a=a,
            skin_b=b,
            sat_lateral=t,
            sat_anterior=0.9 * t,
            sat_posterior=0.6 * t,
            gap_count=i % 7,
            vat_blob_count=int(rng.integers(10, 20)),
            cavity_count=int(rng.integers(1, 4)) if cav_room else 0,
            noise_sigma=noise_sigma,
            seed=int(rng.integers(0, 2**31 - 1)),
        ))
    return out


def suite(seed: int = 42, noise_sigma: float = 15.0) -> list[tuple[VolumeGrid, MaskGrid]]:
    return [generate(p) for p in suite_params(seed, noise_sigma)]
