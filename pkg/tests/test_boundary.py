import numpy as np
import pytest
from hypothesis import given, strategies as st

from fatseg.boundary import (
    CandidateBoundary, Contour, NoSubjectError, build_ray_fan, detect_transitions,
    extract_skin_contour, fill_holes,
)
from fatseg.phantom import PhantomParams, generate, slice_geometry
from fatseg.preprocess import preprocess_slice
from fatseg.volume_io import extract_slice


def disk_mask(shape, c, r):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (xx - c[0]) ** 2 + (yy - c[1]) ** 2 <= r * r


def ring_slice(r_in=30, r_out=40, size=101):
    """Fat ring between r_in and r_out, muscle inside, air outside."""
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2
    r = np.hypot(xx - c, yy - c)
    fat = (r <= r_out) & (r >= r_in)
    return fat, c


def test_disk_contour_is_boundary_scan():
    m = disk_mask((61, 61), (30, 30), 20)
    cont = extract_skin_contour(m)
    pad = np.pad(m, 1)
    inner = pad[1:-1, 1:-1] & pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    boundary = {(x, y) for y, x in np.argwhere(m & ~inner)}
    assert set(map(tuple, cont.points.tolist())) == boundary
    assert abs(cont.length() - 2 * np.pi * 20) < 0.1 * 2 * np.pi * 20


def test_hole_ignored_and_largest_blob():
    m = disk_mask((80, 80), (30, 30), 20) & ~disk_mask((80, 80), (30, 30), 8)
    m |= disk_mask((80, 80), (68, 68), 6)
    cont = extract_skin_contour(m)
    pts = cont.points
    r = np.hypot(pts[:, 0] - 30, pts[:, 1] - 30)
    assert r.min() > 18 and r.max() < 21
    assert fill_holes(m)[30, 30]


def test_no_subject():
    with pytest.raises(NoSubjectError):
        extract_skin_contour(np.zeros((10, 10), bool))
    with pytest.raises(NoSubjectError):
        Contour(np.array([[0, 0], [1, 1]]))


def test_square_center():
    m = np.zeros((40, 40), bool)
    m[10:31, 5:26] = True
    fan = build_ray_fan(extract_skin_contour(m), 64)
    assert np.allclose(fan.center, [15, 20])


def test_circle_fan_spacing_and_center():
    m = disk_mask((121, 121), (60, 60), 50)
    fan = build_ray_fan(extract_skin_contour(m), 360)
    assert np.hypot(*(fan.center - 60)) < 0.5
    ang = np.sort(np.degrees(fan.angles))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 360]]))
    assert abs(gaps.mean() - 1.0) < 1e-9
    assert np.all(np.abs(gaps - 1.0) < 0.6)
    assert np.allclose(np.hypot(*fan.directions.T), 1.0)


def test_fan_validation():
    cont = extract_skin_contour(disk_mask((30, 30), (15, 15), 10))
    with pytest.raises(ValueError):
        build_ray_fan(cont, 4)
    with pytest.raises(ValueError):
        build_ray_fan(cont, 16, step=0)
    with pytest.raises(ValueError):
        build_ray_fan(Contour(np.array([[0, 0], [1, 0], [2, 0]])), 16)


def test_concentric_ring_candidates():
    fat, c = ring_slice()
    cont = extract_skin_contour(fat)
    fan = build_ray_fan(cont, 360)
    cands = detect_transitions(fan, fat)
    assert len(cands) == 360
    r = np.hypot(cands.position[:, 0] - c, cands.position[:, 1] - c)
    # nearest-pixel lookup of a diagonal sample can sit up to ~0.7 px off the
    # ray, so the first non-fat pixel is within 1.5 px rather than 1 px
    assert np.all(np.abs(r - 30) <= 1.5)
    assert np.median(np.abs(r - 30)) <= 1.0


def test_candidate_invariants():
    fat, _ = ring_slice(25, 45)
    fan = build_ray_fan(extract_skin_contour(fat), 180)
    cands = detect_transitions(fan, fat)
    rel = cands.position - cands.skin_point
    t = (rel * fan.directions[cands.ray_index]).sum(axis=1)
    assert np.all(t > 0) and np.all(t < fan.lengths[cands.ray_index])
    assert np.allclose(cands.radial_distance, np.hypot(rel[:, 0], rel[:, 1]))
    assert np.all(cands.skin_point == fan.starts[cands.ray_index])


def test_fat_to_center_has_no_candidate():
    m = disk_mask((61, 61), (30, 30), 20)
    fan = build_ray_fan(extract_skin_contour(m), 90)
    assert len(detect_transitions(fan, m)) == 0


def test_no_fat_gives_empty():
    m = disk_mask((61, 61), (30, 30), 20)
    fan = build_ray_fan(extract_skin_contour(m), 90)
    out = detect_transitions(fan, np.zeros_like(m))
    assert isinstance(out, CandidateBoundary) and len(out) == 0


def test_min_run():
    # a one-sample fat sliver right under the skin must not trigger
    fat, c = ring_slice(30, 40)
    fan = build_ray_fan(extract_skin_contour(fat), 36, step=1.0)
    xi = np.floor(fan.starts[:, 0] + 0.5).astype(int)
    yi = np.floor(fan.starts[:, 1] + 0.5).astype(int)
    m = np.zeros_like(fat)
    m[yi, xi] = True
    assert len(detect_transitions(fan, m, min_run=2)) == 0
    assert len(detect_transitions(fan, m, min_run=1)) > 0


@given(st.integers(0, 10_000))
def test_candidates_between_skin_and_center(seed):
    rng = np.random.default_rng(seed)
    fat, _ = ring_slice(int(rng.integers(15, 30)), 44, 101)
    fat &= rng.random(fat.shape) > 0.05
    fan = build_ray_fan(extract_skin_contour(fat), int(rng.integers(8, 200)))
    cands = detect_transitions(fan, fat)
    rel = cands.position - fan.center
    assert np.all(np.hypot(rel[:, 0], rel[:, 1]) < fan.lengths[cands.ray_index] + 1.0)


def test_noise_free_phantom_candidates_on_wall():
    p = PhantomParams(nz=1, noise_sigma=0.0, gap_count=0, vat_blob_count=0)
    vol, _ = generate(p)
    _, smooth = preprocess_slice(extract_slice(vol, 0))
    cands = detect_transitions(build_ray_fan(extract_skin_contour(smooth)), smooth)
    g = slice_geometry(p, 0)
    th = np.linspace(-np.pi, np.pi, 20000, endpoint=False)
    rw = g.wall_outer.radius(th)
    curve = np.stack([g.center[0] + rw * np.cos(th), g.center[1] + rw * np.sin(th)], axis=1)
    d = np.sqrt(((cands.position[:, None, :] - curve[None]) ** 2).sum(axis=2)).min(axis=1)
    assert len(cands) == 360
    assert d.max() <= 1.5
