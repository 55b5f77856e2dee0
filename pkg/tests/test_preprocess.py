import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from fatseg.preprocess import (
    PreprocessParams, disk, median_filter, morph_close_disk, preprocess_slice, threshold_fat,
)

masks = arrays(bool, st.tuples(st.integers(1, 24), st.integers(1, 24)))


def test_threshold_examples():
    hu = np.array([[-100, 0, -1000, -190, -30, -191, -29]])
    assert threshold_fat(hu).tolist() == [[True, False, False, True, True, False, False]]


def test_threshold_per_pixel(rng):
    hu = rng.integers(-1200, 300, size=(40, 50))
    expect = np.vectorize(lambda v: -190 <= v <= -30)(hu)
    assert np.array_equal(threshold_fat(hu), expect)


@given(arrays(np.int16, (8, 8), elements=st.integers(-400, 100)),
       st.integers(-300, -100), st.integers(-99, 0), st.integers(0, 50), st.integers(0, 50))
def test_threshold_monotone_in_window(hu, lo, hi, widen_lo, widen_hi):
    narrow = threshold_fat(hu, PreprocessParams(lo, hi))
    wide = threshold_fat(hu, PreprocessParams(lo - widen_lo, hi + widen_hi))
    assert np.all(wide[narrow])


def test_params_validation():
    with pytest.raises(ValueError):
        PreprocessParams(-30, -190)
    with pytest.raises(ValueError):
        PreprocessParams(disk_radius=-1)
    with pytest.raises(ValueError):
        PreprocessParams(median_window=4)
    with pytest.raises(ValueError):
        threshold_fat(np.zeros((0, 0)))


def test_disk_footprint():
    d = disk(2)
    assert d.shape == (5, 5)
    assert d.sum() == len(oracles.disk_offsets(2)) == 13


def test_close_radius_zero_identity(rng):
    m = rng.random((15, 15)) < 0.4
    assert np.array_equal(morph_close_disk(m, 0), m)


def test_close_fills_gap():
    # two isolated pixels are never bridged (a background disk fits beside
    # them), so the gap sits between two short segments
    m = np.zeros((10, 10), bool)
    m[5, 3] = m[5, 6] = True
    assert np.array_equal(morph_close_disk(m, 2), m)
    m[2:9, 3] = m[2:9, 6] = True
    out = morph_close_disk(m, 2)
    assert out[5, 3:7].all()
    assert np.array_equal(out, oracles.closing(m, 2))


def test_close_border_is_background():
    m = np.zeros((8, 8), bool)
    m[0, :] = True
    out = morph_close_disk(m, 3)
    assert np.array_equal(out, m)


@given(masks, st.integers(0, 4))
def test_close_matches_oracle(m, r):
    assert np.array_equal(morph_close_disk(m, r), oracles.closing(m, r))


@given(masks, st.integers(0, 4))
def test_close_extensive_idempotent(m, r):
    c = morph_close_disk(m, r)
    assert np.all(c[m])
    assert np.array_equal(morph_close_disk(c, r), c)


@given(masks, st.integers(0, 3), st.data())
def test_close_increasing(m, r, data):
    extra = data.draw(arrays(bool, m.shape))
    bigger = m | extra
    assert np.all(morph_close_disk(bigger, r)[morph_close_disk(m, r)])


def test_median_constant_and_speckle():
    g = np.ones((7, 7), bool)
    assert np.array_equal(median_filter(g), g)
    g = np.zeros((7, 7), bool)
    g[3, 3] = True
    assert not median_filter(g).any()
    g = np.ones((7, 7), bool)
    g[3, 3] = False
    assert median_filter(g).all()


@given(masks)
def test_median_matches_oracle(m):
    assert np.array_equal(median_filter(m), oracles.median_filter(m))


@given(arrays(np.int16, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(-500, 500)))
def test_median_matches_oracle_numeric(g):
    assert np.array_equal(median_filter(g), oracles.median_filter(g))


@given(masks, st.integers(1, 3))
def test_median_rotation_equivariant(m, k):
    assert np.array_equal(median_filter(np.rot90(m, k)), np.rot90(median_filter(m), k))


def test_median_bad_window():
    with pytest.raises(ValueError):
        median_filter(np.zeros((3, 3)), 2)


def test_preprocess_slice_outputs():
    hu = np.full((60, 60), 40)
    hu[10:50, 10:50] = -100
    hu[28:32, 28:32] = 40        # small hole, closed away
    fat, smooth = preprocess_slice(hu)
    assert np.array_equal(fat, threshold_fat(hu))
    assert smooth[28:32, 28:32].all()
    assert fat.dtype == bool and smooth.dtype == bool
