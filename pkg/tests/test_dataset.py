import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facekit.dataset import (LabeledDataset, center_crop, encode_pgm, histogram_equalize, load_pgm,
                             manifest_for_directory, parse_pgm, read_manifest, resize_nearest, save_pgm,
                             stratified_split, synth_dataset, write_dataset)
from facekit.errors import (ConstantImageWarning, InsufficientSamples, MalformedHeader, TruncatedData,
                            UnsupportedMaxval)


def test_p2_decode(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P2\n# comment\n2 2\n255\n0 10\n20 30\n")
    assert load_pgm(path).tolist() == [[0, 10], [20, 30]]


def test_p5_truncated():
    data = b"P5\n92 112\n255\n" + bytes(92 * 112 - 1)
    with pytest.raises(TruncatedData):
        parse_pgm(data)


@pytest.mark.parametrize("blob, err", [
    (b"P6\n1 1\n255\n\x00", MalformedHeader),
    (b"P5\n1 1\n65535\n\x00\x00", UnsupportedMaxval),
    (b"P5\n1\n", MalformedHeader),
    (b"P2\n2 1\n255\n1 x\n", MalformedHeader),
])
def test_header_errors(blob, err):
    with pytest.raises(err):
        parse_pgm(blob)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_pgm(tmp_path / "nope.pgm")


@pytest.mark.parametrize("binary", [True, False])
def test_round_trip_bit_exact(tmp_path, rng, binary):
    img = rng.integers(0, 256, size=(7, 5))
    path = tmp_path / "r.pgm"
    save_pgm(path, img, binary=binary)
    assert np.array_equal(load_pgm(path), img)
    blob = path.read_bytes()
    save_pgm(path, load_pgm(path), binary=binary)
    assert path.read_bytes() == blob


def test_p5_raster_may_contain_whitespace_bytes():
    img = np.array([[10, 32], [13, 9]])  # \n, space, \r, \t
    assert np.array_equal(parse_pgm(encode_pgm(img)), img)


def test_equalize_hand_example():
    # cdf = {0: 2, 100: 3, 200: 4}, cdf_min = 2, N = 4:
    # 100 -> 255 * 1/2 = 127.5 -> 128, 200 -> 255
    out = histogram_equalize(np.array([[0, 0], [100, 200]]))
    assert out.ravel().tolist() == [0, 0, 128, 255]


def test_equalize_two_levels_unchanged():
    img = np.array([[0, 0], [255, 255]])
    assert np.array_equal(histogram_equalize(img), img)


def test_equalize_constant_flagged():
    img = np.full((3, 3), 77)
    with pytest.warns(ConstantImageWarning):
        out = histogram_equalize(img)
    assert np.array_equal(out, img)


def test_equalize_rejects_non_integer():
    with pytest.raises(ValueError):
        histogram_equalize(np.array([[0.5, 1.0]]))


images = st.lists(st.integers(0, 255), min_size=2, max_size=60).map(lambda v: np.array(v).reshape(1, -1))


@settings(max_examples=200, deadline=None)
@given(images)
def test_equalize_properties(img):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantImageWarning)
        once = histogram_equalize(img)
        twice = histogram_equalize(once)
    assert once.min() >= 0 and once.max() <= 255
    order = np.argsort(img.ravel(), kind="stable")
    assert np.all(np.diff(once.ravel()[order]) >= 0)
    assert np.max(np.abs(twice - once)) <= 1


def test_crop_and_resize():
    img = np.arange(20).reshape(4, 5)
    assert center_crop(img, (2, 3)).tolist() == [[6, 7, 8], [11, 12, 13]]
    assert resize_nearest(img, (2, 5)).tolist() == [img[0].tolist(), img[2].tolist()]
    assert resize_nearest(img, (4, 5)).tolist() == img.tolist()


def test_dataset_invariants():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 2, 2)), [0, 2])
    ds = LabeledDataset(np.zeros((3, 2, 2)), [0, 1, 1])
    assert ds.per_class_counts.tolist() == [1, 2]
    assert ds.per_class_counts.sum() == len(ds)


def test_split_exhaustive():
    ds = synth_dataset(3, 4, (4, 4), seed=0)
    plan = stratified_split(ds, 4, 0, seed=5)
    assert sorted(plan.train_indices) == list(range(12))
    assert len(plan.test_indices) == 0


def test_split_orl_shape():
    ds = LabeledDataset(np.zeros((400, 2, 2)), np.repeat(np.arange(40), 10))
    plan = stratified_split(ds, 5, 5, seed=0)
    assert len(plan.train_indices) == 200 and len(plan.test_indices) == 200
    assert np.all(np.bincount(ds.labels[plan.train_indices]) == 5)
    assert np.all(np.bincount(ds.labels[plan.test_indices]) == 5)


def test_split_determinism():
    ds = synth_dataset(5, 10, (3, 3), seed=0)
    a, b = stratified_split(ds, 5, 5, 9), stratified_split(ds, 5, 5, 9)
    c = stratified_split(ds, 5, 5, 10)
    assert np.array_equal(a.train_indices, b.train_indices)
    assert not np.array_equal(a.train_indices, c.train_indices)


def test_split_insufficient():
    ds = synth_dataset(2, 3, (3, 3), seed=0)
    with pytest.raises(InsufficientSamples):
        stratified_split(ds, 2, 2, 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 9), min_size=1, max_size=6), st.integers(0, 2**32 - 1), st.data())
def test_split_properties(sizes, seed, data):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    ds = LabeledDataset(np.zeros((len(labels), 1, 1)), labels)
    tr = data.draw(st.integers(0, min(sizes)))
    te = data.draw(st.integers(0, min(sizes) - tr))
    plan = stratified_split(ds, tr, te, seed)
    assert not set(plan.train_indices) & set(plan.test_indices)
    assert np.all(np.bincount(labels[plan.train_indices], minlength=len(sizes)) == tr)
    assert np.all(np.bincount(labels[plan.test_indices], minlength=len(sizes)) == te)


def test_synth_zero_noise():
    ds = synth_dataset(3, 4, (5, 5), class_sep=1.0, noise=0.0, seed=1)
    for c in range(3):
        members = ds.images[ds.labels == c]
        assert np.all(members == members[0])
    flat = synth_dataset(3, 4, (5, 5), class_sep=0.0, noise=0.0, seed=1)
    assert np.all(flat.images == flat.images[0])


def test_synth_separable_raw_pixels_1nn():
    ds = synth_dataset(8, 6, (6, 5), class_sep=3.0, noise=0.05, seed=4)
    plan = stratified_split(ds, 3, 3, seed=0)
    train = ds.images[plan.train_indices].reshape(len(plan.train_indices), -1)
    hits = 0
    for i in plan.test_indices:
        j = np.argmin(np.linalg.norm(train - ds.images[i].ravel(), axis=1))
        hits += ds.labels[plan.train_indices[j]] == ds.labels[i]
    assert hits == len(plan.test_indices)


def test_manifest_round_trip(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(4, 3, 2)).astype(float)
    ds = LabeledDataset(imgs, [0, 0, 1, 1], ("alice", "bob"))
    manifest = write_dataset(ds, tmp_path)
    back = read_manifest(manifest)
    assert np.array_equal(back.images, ds.images)
    assert back.class_names == ("alice", "bob")


def test_manifest_labels_first_seen_order(tmp_path):
    for name in ("x.pgm", "y.pgm", "z.pgm"):
        save_pgm(tmp_path / name, np.ones((2, 2)))
    (tmp_path / "m.txt").write_text("x.pgm zed\ny.pgm amy\nz.pgm zed\n")
    ds = read_manifest(tmp_path / "m.txt")
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.class_names == ("zed", "amy")


def test_manifest_for_class_directories(tmp_path):
    for s in ("s1", "s2", "s10"):
        (tmp_path / s).mkdir()
        for i in (1, 2, 10):
            save_pgm(tmp_path / s / f"{i}.pgm", np.full((2, 2), i))
    ds = read_manifest(manifest_for_directory(tmp_path))
    assert ds.class_names == ("s1", "s2", "s10")
    assert ds.paths[:3] == ("s1/1.pgm", "s1/2.pgm", "s1/10.pgm")
