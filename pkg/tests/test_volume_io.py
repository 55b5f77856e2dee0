import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fatseg.phantom import PhantomParams, generate, render_slice, _layout
from fatseg.volume_io import (
    Label, MaskGrid, VolumeFormatError, VolumeGrid, VoxelSpacing, extract_slice, load_mask,
    load_volume, read_header, save_mask, save_volume,
)

SP = VoxelSpacing(1.17, 1.17, 5.0)


def write_pair(tmp_path, dims="4 4 1", payload=b"\0" * 32, **overrides):
    fields = {"dims": dims, "spacing": "1.17 1.17 5", "type": "int16", "order": "little", "raw": "v.raw"}
    fields.update(overrides)
    hdr = tmp_path / "v.hdr"
    hdr.write_text("".join(f"{k}={v}\n" for k, v in fields.items()))
    (tmp_path / "v.raw").write_bytes(payload)
    return hdr


def test_minimal_file(tmp_path):
    vol = load_volume(write_pair(tmp_path))
    assert vol.dims == (4, 4, 1)
    assert vol.data.size == 16
    assert vol.spacing == SP


def test_size_mismatch(tmp_path):
    with pytest.raises(VolumeFormatError):
        load_volume(write_pair(tmp_path, payload=b"\0" * 30))


@pytest.mark.parametrize("key,value", [("type", "float32"), ("order", "big"), ("dims", "4 4"),
                                       ("dims", "0 4 1"), ("spacing", "1 1 0"), ("spacing", "a b c")])
def test_bad_header_values(tmp_path, key, value):
    with pytest.raises(VolumeFormatError):
        load_volume(write_pair(tmp_path, **{key: value}))


def test_missing_key(tmp_path):
    hdr = write_pair(tmp_path)
    hdr.write_text("\n".join(l for l in hdr.read_text().splitlines() if not l.startswith("order")))
    with pytest.raises(VolumeFormatError):
        read_header(hdr)


def test_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_volume(tmp_path / "nope.hdr")
    hdr = write_pair(tmp_path)
    (tmp_path / "v.raw").unlink()
    with pytest.raises(FileNotFoundError):
        load_volume(hdr)


def test_header_text_and_layout(tmp_path):
    data = np.arange(2 * 3 * 4, dtype=np.int16).reshape(2, 3, 4) - 7   # (nz, ny, nx)
    save_volume(VolumeGrid(data, VoxelSpacing(0.5, 0.75, 2.0)), tmp_path / "a.hdr")
    assert (tmp_path / "a.hdr").read_text() == (
        "dims=4 3 2\nspacing=0.5 0.75 2.0\ntype=int16\norder=little\nraw=a.raw\n")
    raw = np.frombuffer((tmp_path / "a.raw").read_bytes(), dtype="<i2")
    # x fastest, then y, then z
    x, y, z = 3, 1, 1
    assert raw[x + 4 * (y + 3 * z)] == data[z, y, x]


def test_mask_wrong_type(tmp_path):
    hdr = write_pair(tmp_path)
    with pytest.raises(VolumeFormatError):
        load_mask(hdr)


def test_background_mask_payload(tmp_path):
    save_mask(MaskGrid(np.zeros((2, 5, 6), np.uint8), SP), tmp_path / "m.hdr")
    payload = (tmp_path / "m.raw").read_bytes()
    assert len(payload) == 60 and set(payload) == {0}


def test_invalid_grids():
    with pytest.raises(VolumeFormatError):
        VolumeGrid(np.zeros((4, 4)), SP)
    with pytest.raises(VolumeFormatError):
        VolumeGrid(np.full((1, 2, 2), 40000), SP)
    with pytest.raises(VolumeFormatError):
        MaskGrid(np.full((1, 2, 2), 4), SP)
    with pytest.raises(VolumeFormatError):
        VoxelSpacing(1.0, -1.0, 1.0)
    with pytest.raises(VolumeFormatError):
        VoxelSpacing(1.0, float("nan"), 1.0)


@given(arrays(np.int16, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6))),
       st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_volume_round_trip(tmp_path_factory, data, dx, dy, dz):
    d = tmp_path_factory.mktemp("rt")
    vol = VolumeGrid(data, VoxelSpacing(dx, dy, dz))
    save_volume(vol, d / "v.hdr")
    assert load_volume(d / "v.hdr") == vol


@given(arrays(np.uint8, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
              elements=st.integers(0, 3)))
def test_mask_round_trip(tmp_path_factory, data):
    d = tmp_path_factory.mktemp("rt")
    m = MaskGrid(data, SP)
    save_mask(m, d / "m.hdr")
    assert load_mask(d / "m.hdr") == m


def test_phantom_round_trip(tmp_path):
    vol, truth = generate(PhantomParams(nz=2, seed=3))
    save_volume(vol, tmp_path / "p.hdr")
    save_mask(truth, tmp_path / "t.hdr")
    v2, t2 = load_volume(tmp_path / "p.hdr"), load_mask(tmp_path / "t.hdr")
    assert v2 == vol and t2 == truth
    assert np.array_equal(v2.data.view(np.uint16), vol.data.view(np.uint16))
    from fatseg.evaluate import dice
    assert dice(t2.data, truth.data, Label.VAT) == 1.0


def test_extract_slice():
    data = np.zeros((3, 4, 5), np.int16)
    data[0] = -1000
    data[1] = np.arange(20).reshape(4, 5)
    vol = VolumeGrid(data, SP)
    s0 = extract_slice(vol, 0)
    assert s0.shape == (4, 5) and np.all(s0 == -1000)
    assert np.array_equal(extract_slice(vol, 1), data[1])
    assert not s0.flags.writeable
    with pytest.raises(IndexError):
        extract_slice(vol, 3)
    with pytest.raises(IndexError):
        extract_slice(vol, -1)


def test_extract_slice_matches_rasterization():
    p = PhantomParams(nz=2, noise_sigma=0.0, seed=5)
    vol, _ = generate(p)
    layout = _layout(p, np.random.default_rng(p.seed))
    img, _ = render_slice(p, 1, layout)
    assert np.array_equal(extract_slice(vol, 1), np.floor(img + 0.5).astype(np.int16))


def test_grids_are_immutable():
    vol = VolumeGrid(np.zeros((1, 2, 2), np.int16), SP)
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 5


def test_label_volume_units():
    m = MaskGrid(np.full((10, 10, 10), Label.VAT, np.uint8), VoxelSpacing(1, 1, 1))
    assert m.volume_ml(Label.VAT) == 1.0
    one = MaskGrid(np.full((1, 1, 1), Label.SAT, np.uint8), SP)
    assert one.volume_ml(Label.SAT) == pytest.approx(0.0068445, abs=1e-12)
