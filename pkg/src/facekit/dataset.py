"""Grayscale image I/O, pre-processing and labeled face datasets."""
from __future__ import annotations

import os
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConstantImageWarning, DimensionMismatch, InsufficientSamples,
                     MalformedHeader, TruncatedData, UnsupportedMaxval)

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data: bytes, count: int):
    """Read ``count`` whitespace separated header tokens, skipping comments.

    Returns the tokens and the offset just after the last one.
    """
    tokens, pos = [], 0
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MalformedHeader("PGM header ends early")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode P2 or P5 bytes into a float64 ``(rows, cols)`` array."""
    tokens, pos = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise MalformedHeader(f"unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeader("non-integer PGM header field") from exc
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise UnsupportedMaxval(f"maxval {maxval} not in 1..255")
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates header from raster
        raster = data[pos + 1:pos + 1 + count]
        if len(raster) < count:
            raise TruncatedData(f"expected {count} pixels, found {len(raster)}")
        pixels = np.frombuffer(raster, dtype=np.uint8)
    else:
        values = data[pos:].split()
        if len(values) < count:
            raise TruncatedData(f"expected {count} pixels, found {len(values)}")
        try:
            pixels = np.array([int(v) for v in values[:count]])
        except ValueError as exc:
            raise MalformedHeader("non-integer pixel in P2 raster") from exc
    if pixels.max(initial=0) > maxval:
        raise MalformedHeader("pixel value exceeds maxval")
    return pixels.reshape(height, width).astype(np.float64)


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(img, binary: bool = True) -> bytes:
    pixels = np.asarray(img)
    if pixels.ndim != 2:
        raise DimensionMismatch("PGM images must be 2-D")
    pixels = np.rint(np.clip(pixels, 0, 255)).astype(np.uint8)
    height, width = pixels.shape
    if binary:
        return b"P5\n%d %d\n255\n" % (width, height) + pixels.tobytes()
    rows = [" ".join(str(v) for v in row) for row in pixels]
    return (f"P2\n{width} {height}\n255\n" + "\n".join(rows) + "\n").encode("ascii")


def save_pgm(path, img, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img, binary=binary))


def histogram_equalize(img) -> np.ndarray:
    """Spread intensities through the cumulative histogram.

    Each level ``v`` maps to ``round(255 (cdf(v) - cdf_min) / (N - cdf_min))``
    with halves rounded up.  A constant image comes back unchanged and a
    :class:`ConstantImageWarning` is issued.
    """
    pixels = np.asarray(img)
    levels = np.rint(pixels).astype(np.int64)
    if levels.min() < 0 or levels.max() > 255 or not np.array_equal(levels, pixels):
        raise ValueError("histogram equalization needs integer pixels in [0, 255]")
    cdf = np.cumsum(np.bincount(levels.ravel(), minlength=256))
    total = levels.size
    cdf_min = cdf[cdf > 0][0]
    if cdf_min == total:
        warnings.warn("constant image left unchanged", ConstantImageWarning, stacklevel=2)
        return np.asarray(img, dtype=np.float64).copy()
    lut = np.floor(255.0 * (cdf - cdf_min) / (total - cdf_min) + 0.5)
    return lut[levels].astype(np.float64)


def center_crop(img, shape) -> np.ndarray:
    img = np.asarray(img)
    rows, cols = shape
    if rows > img.shape[0] or cols > img.shape[1]:
        raise DimensionMismatch(f"cannot crop {img.shape} to {shape}")
    top = (img.shape[0] - rows) // 2
    left = (img.shape[1] - cols) // 2
    return img[top:top + rows, left:left + cols].copy()


def resize_nearest(img, shape) -> np.ndarray:
    img = np.asarray(img)
    rows, cols = shape
    ri = (np.arange(rows) * img.shape[0]) // rows
    ci = (np.arange(cols) * img.shape[1]) // cols
    return img[np.ix_(ri, ci)].copy()


@dataclass(frozen=True)
class LabeledDataset:
    """Same-shape images with dense class labels ``0..C-1``.

    ``images`` is a ``(M, m, n)`` float array.  ``class_names`` keeps the
    original label strings in first-seen order; ``paths`` is optional.
    """
    images: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()
    paths: tuple = field(default=(), compare=False)

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 3 or len(images) == 0:
            raise DimensionMismatch("images must be a non-empty (M, m, n) stack")
        if labels.shape != (len(images),):
            raise DimensionMismatch("one label per image required")
        if not np.all(np.isfinite(images)):
            raise ValueError("images contain NaN or infinite values")
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        classes = int(labels.max()) + 1
        if np.any(np.bincount(labels, minlength=classes) == 0):
            raise ValueError("every class in 0..C-1 needs at least one image")
        names = tuple(self.class_names) or tuple(str(c) for c in range(classes))
        if len(names) != classes:
            raise ValueError(f"{len(names)} class names for {classes} classes")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    def __len__(self):
        return len(self.images)

    @property
    def shape(self):
        return self.images.shape[1:]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def per_class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def map(self, fn) -> "LabeledDataset":
        return LabeledDataset(np.stack([fn(im) for im in self.images]), self.labels,
                              self.class_names, self.paths)


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    per_class_train: int
    per_class_test: int
    seed: int

    def to_text(self) -> str:
        lines = [f"# per_class_train={self.per_class_train} per_class_test={self.per_class_test} seed={self.seed}"]
        lines += [f"train {i}" for i in self.train_indices]
        lines += [f"test {i}" for i in self.test_indices]
        return "\n".join(lines) + "\n"


def stratified_split(ds: LabeledDataset, per_class_train: int, per_class_test: int,
                     seed) -> SplitPlan:
    """Draw, per class and without replacement, disjoint train/test images."""
    if per_class_train < 0 or per_class_test < 0:
        raise ValueError("per-class counts must be non-negative")
    need = per_class_train + per_class_test
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < need:
            raise InsufficientSamples(ds.class_names[c], len(members), need)
        picked = rng.choice(members, size=need, replace=False)
        train.extend(sorted(picked[:per_class_train]))
        test.extend(sorted(picked[per_class_train:]))
    return SplitPlan(np.array(train, dtype=np.int64), np.array(test, dtype=np.int64),
                     per_class_train, per_class_test, seed)


def synth_dataset(classes: int, per_class: int, shape=(16, 12), class_sep: float = 1.0,
                  noise: float = 0.1, seed=0) -> LabeledDataset:
    """Gaussian classes around random means.

    Class means have i.i.d. ``N(0, class_sep**2)`` pixels and each image
    adds i.i.d. ``N(0, noise**2)`` pixels.  A constant offset keeps every
    image away from zero so cosine distance stays defined.
    """
    if classes < 1 or per_class < 1:
        raise ValueError("classes and per_class must be >= 1")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rows, cols = shape
    rng = np.random.default_rng(seed)
    means = class_sep * rng.normal(size=(classes, rows, cols))
    labels = np.repeat(np.arange(classes), per_class)
    images = 1.0 + means[labels] + noise * rng.normal(size=(len(labels), rows, cols))
    return LabeledDataset(images, labels)


def read_manifest(path, equalize: bool = False) -> LabeledDataset:
    """Load ``<relative-path> <class-label>`` records relative to the manifest."""
    path = Path(path)
    base = path.parent
    images, labels, paths, names = [], [], [], {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.rsplit(None, 1)
            if len(parts) != 2:
                raise MalformedHeader(f"{path}:{lineno}: expected '<path> <label>'")
            rel, label = parts
            img = load_pgm(base / rel)
            if images and img.shape != images[0].shape:
                raise DimensionMismatch(f"{rel}: shape {img.shape} differs from {images[0].shape}")
            images.append(img)
            labels.append(names.setdefault(label, len(names)))
            paths.append(rel)
    if not images:
        raise ValueError(f"{path}: manifest lists no images")
    ds = LabeledDataset(np.stack(images), np.array(labels), tuple(names), tuple(paths))
    return ds.map(histogram_equalize) if equalize else ds


def write_manifest(path, entries) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rel, label in entries:
            fh.write(f"{rel} {label}\n")


def manifest_for_directory(root) -> Path:
    """Write ``manifest.txt`` for a one-directory-per-class PGM tree
    (the AT&T/ORL ``s1/1.pgm`` layout) and return its path."""
    root = Path(root)

    def natural(p):
        return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", p.name)]

    entries = []
    for cls in sorted((p for p in root.iterdir() if p.is_dir()), key=natural):
        for img in sorted(cls.glob("*.pgm"), key=natural):
            entries.append((os.path.relpath(img, root), cls.name))
    manifest = root / "manifest.txt"
    write_manifest(manifest, entries)
    return manifest


def write_dataset(ds: LabeledDataset, out_dir, binary: bool = True) -> Path:
    """Save every image as PGM plus a manifest; pixels are rounded to 0..255."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    width = len(str(len(ds)))
    for i, (img, label) in enumerate(zip(ds.images, ds.labels)):
        name = f"img{i:0{width}d}.pgm"
        save_pgm(out_dir / name, img, binary=binary)
        entries.append((name, ds.class_names[label]))
    manifest = out_dir / "manifest.txt"
    write_manifest(manifest, entries)
    return manifest
