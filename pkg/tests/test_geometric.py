import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from fatseg.boundary import CandidateBoundary
from fatseg.geometric import MAD_THRESHOLD, filter_by_mad, mad_scores

distances = st.lists(st.floats(0, 1000, allow_nan=False), min_size=3, max_size=200)


def cands_from(d):
    d = np.asarray(d, float)
    n = len(d)
    skin = np.zeros((n, 2))
    pos = np.stack([np.round(d).astype(int), np.zeros(n, int)], axis=1)
    return CandidateBoundary(np.arange(n), pos, skin, (0.0, 0.0))


def test_worked_example():
    r = mad_scores([3, 4, 5, 6, 100])
    assert r.median_distance == 5 and r.mad == 1
    assert r.phi.tolist() == [2, 1, 0, 1, 95]
    kept = filter_by_mad(cands_from([3, 4, 5, 6, 100]), r)
    assert len(kept) == 4 and kept.phi.max() == 2


def test_degenerate_mad():
    r = mad_scores([7, 7, 7, 7, 30])
    assert r.mad == 0 and np.all(r.phi == 0) and r.inlier.all()
    c = cands_from([4, 4, 4, 4])
    assert len(filter_by_mad(c, mad_scores(c))) == 4


def test_threshold_infinite_is_identity():
    c = cands_from([1, 2, 3, 50, 400])
    assert len(filter_by_mad(c, mad_scores(c), threshold=np.inf)) == 5


def test_too_few():
    with pytest.raises(ValueError):
        mad_scores([1.0, 2.0])


def test_misaligned_filter():
    with pytest.raises(ValueError):
        filter_by_mad(cands_from([1, 2, 3]), mad_scores([1, 2, 3, 4]))


def test_default_threshold():
    assert MAD_THRESHOLD == 2.5
    assert mad_scores([1, 2, 3]).threshold == 2.5


@given(distances)
def test_matches_sort_oracle(d):
    assert mad_scores(d).phi.tolist() == oracles.mad_phi(d)


@given(distances, st.randoms(use_true_random=False))
def test_permutation_equivariant(d, rnd):
    perm = list(range(len(d)))
    rnd.shuffle(perm)
    a = mad_scores(d).phi
    b = mad_scores([d[i] for i in perm]).phi
    assert np.array_equal(a[perm], b)


@given(st.lists(st.integers(0, 500), min_size=3, max_size=100), st.integers(-200, 200), st.integers(1, 8))
def test_shift_and_scale_invariant(d, shift, scale):
    # integer data keeps every operation exact
    base = mad_scores(np.array(d, float)).phi
    assert np.allclose(mad_scores(np.array(d, float) + shift).phi, base, rtol=0, atol=1e-12)
    assert np.allclose(mad_scores(np.array(d, float) * scale).phi, base, rtol=0, atol=1e-12)


@given(st.lists(st.integers(0, 100), min_size=4, max_size=60), st.integers(1000, 5000))
def test_removing_unique_max_outlier(d, big):
    d = np.array(d + [big], float)
    before = mad_scores(d).phi
    if before[-1] <= 2.5:
        return
    after = oracles.mad_phi(d[:-1])
    for p0, p1 in zip(before[:-1], after):
        if p0 == 0:
            assert p1 <= 2.5


def test_candidate_input_uses_radial_distance():
    c = cands_from([10, 11, 12, 13, 40])
    assert np.array_equal(mad_scores(c).phi, mad_scores(c.radial_distance).phi)
    kept = filter_by_mad(c, mad_scores(c))
    assert np.all(np.isfinite(kept.phi))
