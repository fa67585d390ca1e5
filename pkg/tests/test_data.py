import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from localseg.data import (
    PASCAL5I,
    SynthConfig,
    generate_synthetic_dataset,
    holdout_split,
    load_dataset,
    load_image,
    load_mask,
    pascal5i_split,
    read_tensor,
    save_dataset,
    save_image,
    save_map,
    save_mask,
    write_tensor,
)
from localseg.data.fst import decode_tensors, encode_tensors
from localseg.data.netpbm import decode, encode
from localseg.data.synthetic import RING_INNER, shape_mask
from localseg.errors import FormatError, InvalidConfig, InvalidSplit, IoError, NonBinaryMask


# ---- splits -------------------------------------------------------------

def test_pascal_split_contents():
    assert pascal5i_split(0)[1] == ["aeroplane", "bicycle", "bird", "boat", "bottle"]
    assert pascal5i_split(1)[1] == ["bus", "car", "cat", "chair", "cow"]
    assert pascal5i_split(2)[1] == ["diningtable", "dog", "horse", "motorbike", "person"]
    assert pascal5i_split(3)[1] == ["potted plant", "sheep", "sofa", "train", "tv/monitor"]
    with pytest.raises(InvalidSplit):
        pascal5i_split(4)
    with pytest.raises(InvalidSplit):
        pascal5i_split(-1)


def test_pascal_split_partition():
    names = [c for fold in PASCAL5I for c in fold]
    assert len(names) == len(set(names)) == 20
    tests = []
    for i in range(4):
        train, test = pascal5i_split(i)
        assert len(train) == 15 and not set(train) & set(test)
        tests += test
    assert sorted(tests) == sorted(names)


def test_holdout_split():
    classes = ["a", "b", "c", "d", "e", "f"]
    assert holdout_split(classes, 2) == (["a", "b", "d", "e", "f"], ["c"])
    assert holdout_split(classes, 1, folds=3) == (["a", "b", "e", "f"], ["c", "d"])
    with pytest.raises(InvalidSplit):
        holdout_split(classes, 7)


# ---- synthetic ----------------------------------------------------------

def test_synth_deterministic():
    cfg = SynthConfig(size=16, per_class=3, seed=11)
    a, b = generate_synthetic_dataset(cfg), generate_synthetic_dataset(cfg)
    for ra, rb in zip(a.classes, b.classes):
        for (ia, ma), (ib, mb) in zip(ra.pairs, rb.pairs):
            assert ia.tobytes() == ib.tobytes() and ma.tobytes() == mb.tobytes()


def test_synth_counts_and_invariants():
    ds = generate_synthetic_dataset(SynthConfig(per_class=2, seed=0))
    assert len(ds.classes) == 6 and len(ds) == 12
    for rec in ds.classes:
        for img, mask in rec.pairs:
            assert img.shape == (32, 32, 3) and mask.shape == (32, 32)
            assert mask.any() and set(np.unique(mask)) <= {0, 1}
            assert img.min() >= 0 and img.max() <= 1


def test_synth_circle_noise_free_geometric_oracle():
    ds = generate_synthetic_dataset(SynthConfig(classes=("circle", "ring"), per_class=5,
                                                noise=0.0, seed=2))
    rec = ds.get("circle")
    for (img, mask), meta in zip(rec.pairs, rec.meta):
        ys, xs = np.mgrid[0:32, 0:32] + 0.5
        inside = (xs - meta["cx"]) ** 2 + (ys - meta["cy"]) ** 2 <= meta["r"] ** 2
        np.testing.assert_array_equal(mask.astype(bool), inside)
        np.testing.assert_allclose(img[inside], np.broadcast_to(meta["fg"], img[inside].shape))
        np.testing.assert_allclose(img[~inside], np.broadcast_to(meta["bg"], img[~inside].shape))
    ring = ds.get("ring")
    for (_, mask), meta in zip(ring.pairs, ring.meta):
        ys, xs = np.mgrid[0:32, 0:32] + 0.5
        d = np.hypot(xs - meta["cx"], ys - meta["cy"])
        assert np.all(d[mask.astype(bool)] <= meta["r"] + 1e-9)
        assert np.all(d[mask.astype(bool)] >= RING_INNER * meta["r"] - 1e-9)


@pytest.mark.parametrize("kind", ["square", "triangle", "cross", "bar"])
def test_shape_masks_satisfy_inequalities(kind):
    m = shape_mask(kind, 32, 16.0, 16.0, 8.0, angle=0.0)
    ys, xs = np.nonzero(m)
    u, v = xs + 0.5 - 16, ys + 0.5 - 16
    assert m.any()
    assert np.all(np.maximum(np.abs(u), np.abs(v)) <= 8 + 1e-9)
    if kind == "triangle":
        assert np.all(u ** 2 + v ** 2 <= 64 + 1e-9)
    if kind == "bar":
        assert np.all(np.abs(v) <= 2 + 1e-9)


@pytest.mark.parametrize("kwargs", [dict(per_class=1), dict(size=6), dict(classes=("circle",)),
                                    dict(classes=("circle", "blob")), dict(noise=-0.1)])
def test_synth_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        SynthConfig(**kwargs)


# ---- netpbm -------------------------------------------------------------

def test_mask_round_trip(tmp_path, rng):
    mask = (rng.random((9, 13)) < 0.5).astype(np.uint8)
    save_mask(tmp_path / "m.pgm", mask)
    np.testing.assert_array_equal(load_mask(tmp_path / "m.pgm", strict=True), mask)


def test_pgm_16bit_rejected():
    data = b"P5\n2 1\n65535\n" + b"\x00" * 4
    with pytest.raises(FormatError):
        decode(data)


def test_strict_mask_rejects_grey(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n2 1\n255\n\x00\x07")
    with pytest.raises(NonBinaryMask):
        load_mask(tmp_path / "m.pgm", strict=True)
    np.testing.assert_array_equal(load_mask(tmp_path / "m.pgm"), [[0, 0]])


def test_mask_threshold_128(tmp_path):
    (tmp_path / "m.pgm").write_bytes(b"P5\n3 1\n255\n\x7f\x80\xff")
    np.testing.assert_array_equal(load_mask(tmp_path / "m.pgm"), [[0, 1, 1]])


def test_header_comments_and_truncation():
    arr = decode(b"P5 # a comment\n2 # w\n1\n255\n\x01\x02")
    np.testing.assert_array_equal(arr, [[1, 2]])
    with pytest.raises(FormatError):
        decode(b"P5\n2 2\n255\n\x00")
    with pytest.raises(FormatError):
        decode(b"P3\n1 1\n255\n0")


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        load_image(tmp_path / "nope.ppm")


def test_save_map_scaling(tmp_path):
    save_map(tmp_path / "a.pgm", np.array([[0.0, 0.5, 1.0]]))
    np.testing.assert_array_equal(decode((tmp_path / "a.pgm").read_bytes()), [[0, 128, 255]])


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.sampled_from([1, 3]), st.integers(0, 2**32 - 1))
def test_netpbm_round_trip_property(h, w, c, seed):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, size=(h, w, c) if c == 3 else (h, w), dtype=np.uint8)
    np.testing.assert_array_equal(decode(encode(arr)), arr)
    img = arr.astype(np.float64) / 255.0
    assert np.array_equal(decode(encode(np.round(img * 255).astype(np.uint8))), arr)


def test_image_file_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, size=(5, 7, 3)) / 255.0
    save_image(tmp_path / "x.ppm", img)
    np.testing.assert_array_equal(load_image(tmp_path / "x.ppm"), img)
    gray = rng.integers(0, 256, size=(5, 7, 1)) / 255.0
    save_image(tmp_path / "x.pgm", gray)
    np.testing.assert_array_equal(load_image(tmp_path / "x.pgm"), gray)


# ---- FST1 ---------------------------------------------------------------

def test_fst_byte_count_single_entry():
    payload = encode_tensors({"W": np.zeros((2, 3))})
    assert len(payload) == 4 + 4 + (4 + 1) + 4 + 8 + 24
    assert payload[:4] == b"FST1"
    assert struct.unpack("<I", payload[4:8]) == (1,)


def test_fst_layout_fields():
    payload = encode_tensors({"ab": np.array([[1.5, -2.0]])})
    assert payload[8:12] == struct.pack("<I", 2) and payload[12:14] == b"ab"
    assert payload[14:18] == struct.pack("<I", 2)
    assert payload[18:26] == struct.pack("<2I", 1, 2)
    assert payload[26:] == struct.pack("<2f", 1.5, -2.0)


def test_fst_bad_magic_and_truncation():
    good = encode_tensors({"x": np.ones(3)})
    with pytest.raises(FormatError):
        decode_tensors(b"XXXX" + good[4:])
    with pytest.raises(FormatError):
        decode_tensors(good[:-1])
    with pytest.raises(FormatError):
        decode_tensors(good + b"\x00")


def test_fst_file_round_trip(tmp_path, rng):
    tensors = {"W_e": rng.normal(size=(6, 16)), "scalar": np.array(3.0), "ünï": rng.normal(size=(2, 1, 3))}
    write_tensor(tmp_path / "t.fst", tensors)
    back = read_tensor(tmp_path / "t.fst")
    assert list(back) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(back[k], np.asarray(tensors[k], dtype=np.float32))


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_fst_round_trip_property(seed, count):
    rng = np.random.default_rng(seed)
    tensors = {}
    for i in range(count):
        rank = int(rng.integers(0, 4))
        shape = tuple(int(d) for d in rng.integers(0, 5, size=rank))
        tensors[f"t{i}_{rng.integers(1000)}"] = rng.normal(scale=1e3, size=shape)
    back = decode_tensors(encode_tensors(tensors))
    assert list(back) == list(tensors)
    for k, v in tensors.items():
        assert back[k].shape == v.shape
        assert np.array_equal(back[k], v.astype(np.float32))


# ---- directory datasets -------------------------------------------------

def test_dataset_directory_round_trip(tmp_path):
    ds = generate_synthetic_dataset(SynthConfig(size=8, per_class=2, seed=5,
                                                classes=("ring", "circle")))
    save_dataset(ds, tmp_path / "d")
    assert (tmp_path / "d" / "ring" / "000.ppm").exists()
    assert (tmp_path / "d" / "ring" / "001_mask.pgm").exists()
    back = load_dataset(tmp_path / "d")
    assert back.names == ["ring", "circle"]
    for ra, rb in zip(ds.classes, back.classes):
        for (ia, ma), (ib, mb) in zip(ra.pairs, rb.pairs):
            np.testing.assert_array_equal(mb, ma)
            np.testing.assert_allclose(ib, np.round(ia * 255) / 255, atol=1e-12)


def test_load_dataset_missing_dir(tmp_path):
    with pytest.raises(IoError):
        load_dataset(tmp_path / "missing")
