"""Two-dimensional PCA and LDA projection bases.

Right variants project an ``m x n`` image from the right (``A V``), left
variants from the left (``U^T A``) and bilateral ones from both sides
(``U^T A V``).  The PCA bases come from the image covariance matrices,
the LDA bases from the generalized problem on the between/within-class
scatter pair.  The whole spectrum is kept; callers choose which
eigenvectors to use when projecting.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (DegenerateData, DimensionMismatch, DuplicateIndex, EmptySubset,
                     IndexOutOfRange, MalformedHeader, UnsupportedScheme)
from .linalg import EigenDecomposition, sym_eigen, whitened_gen_eigen

FAMILIES = ("pca", "lda")
SCHEMES = ("right", "left", "bilateral")
_PREFIX = {"right": "R", "left": "L", "bilateral": "B"}

BASIS_MAGIC = b"FKBASIS\x00"
BASIS_VERSION = 1
NEGLIGIBLE_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class MethodSpec:
    family: str = "lda"
    scheme: str = "right"
    d: int = 1
    d2: Optional[int] = None  # right-side count for bilateral; defaults to d

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.d < 1 or (self.d2 is not None and self.d2 < 1):
            raise ValueError("retained eigenvector counts must be >= 1")

    @classmethod
    def from_name(cls, name: str, d: int = 1, d2: Optional[int] = None) -> "MethodSpec":
        """Parse names such as ``R2DLDA`` or ``B2DPCA``."""
        key = name.strip().upper()
        schemes = {v: k for k, v in _PREFIX.items()}
        if len(key) != 6 or key[0] not in schemes or key[1:3] != "2D" or key[3:] not in ("PCA", "LDA"):
            raise ValueError(f"unrecognized method name {name!r}")
        return cls(key[3:].lower(), schemes[key[0]], d, d2)

    @property
    def name(self) -> str:
        return f"{_PREFIX[self.scheme]}2D{self.family.upper()}"

    @property
    def uses_left(self) -> bool:
        return self.scheme in ("left", "bilateral")

    @property
    def uses_right(self) -> bool:
        return self.scheme in ("right", "bilateral")

    def counts(self):
        """(left count, right count), ``None`` for an unused side."""
        if self.scheme == "right":
            return None, self.d
        if self.scheme == "left":
            return self.d, None
        return self.d, self.d if self.d2 is None else self.d2

    def validate(self, shape) -> None:
        m, n = shape
        left, right = self.counts()
        if left is not None and left > m:
            raise ValueError(f"{self.name}: left count {left} exceeds m = {m}")
        if right is not None and right > n:
            raise ValueError(f"{self.name}: right count {right} exceeds n = {n}")


def _subset(ds, subset):
    images = ds.images if subset is None else ds.images[np.asarray(subset, dtype=np.int64)]
    labels = ds.labels if subset is None else ds.labels[np.asarray(subset, dtype=np.int64)]
    if len(images) == 0:
        raise EmptySubset("no images selected")
    return images, labels


def mean_image(ds, subset=None) -> np.ndarray:
    images, _ = _subset(ds, subset)
    return images.mean(axis=0)


def _right_gram(stack):
    # sum_k D_k^T D_k
    return np.einsum("kij,kil->jl", stack, stack)


def _left_gram(stack):
    # sum_k D_k D_k^T
    return np.einsum("kij,klj->il", stack, stack)


def pca_right_cov(ds, subset=None) -> np.ndarray:
    images, _ = _subset(ds, subset)
    centered = images - images.mean(axis=0)
    return _right_gram(centered) / len(images)


def pca_left_cov(ds, subset=None) -> np.ndarray:
    images, _ = _subset(ds, subset)
    centered = images - images.mean(axis=0)
    return _left_gram(centered) / len(images)


def _class_parts(images, labels):
    classes = np.unique(labels)
    means = np.stack([images[labels == c].mean(axis=0) for c in classes])
    counts = np.array([np.sum(labels == c) for c in classes], dtype=np.float64)
    lookup = {c: i for i, c in enumerate(classes)}
    within = images - means[[lookup[c] for c in labels]]
    between = (means - images.mean(axis=0)) * np.sqrt(counts)[:, None, None]
    return between, within


def lda_scatter_right(ds, subset=None):
    """(S_b, S_w) for right projection, both ``n x n`` and scaled by 1/M."""
    images, labels = _subset(ds, subset)
    between, within = _class_parts(images, labels)
    total = len(images)
    return _right_gram(between) / total, _right_gram(within) / total


def lda_scatter_left(ds, subset=None):
    """(S_b, S_w) for left projection, both ``m x m`` and scaled by 1/M."""
    images, labels = _subset(ds, subset)
    between, within = _class_parts(images, labels)
    total = len(images)
    return _left_gram(between) / total, _left_gram(within) / total


@dataclass(frozen=True)
class ProjectionBasis:
    """Full eigen-spectra for the sides a method uses.

    ``right`` holds V (PCA) or X (LDA) as columns, ``left`` holds U or Z.
    """
    spec: MethodSpec
    right: Optional[EigenDecomposition] = None
    left: Optional[EigenDecomposition] = None

    def side(self, which: str) -> EigenDecomposition:
        eig = self.right if which == "right" else self.left
        if eig is None:
            raise UnsupportedScheme(f"{self.spec.name} basis has no {which} side")
        return eig

    def spectrum_sizes(self):
        return (None if self.left is None else len(self.left),
                None if self.right is None else len(self.right))

    def negligible(self, which: str) -> np.ndarray:
        """Mask of eigenpairs whose eigenvalue is below 1e-12 of the largest."""
        values = self.side(which).eigenvalues
        top = values[0] if len(values) else 0.0
        return values < NEGLIGIBLE_EIGENVALUE * top


def _solve_side(family, cov_fn, scatter_fn, ds, subset):
    if family == "pca":
        cov = cov_fn(ds, subset)
        if not np.any(cov):
            raise DegenerateData("image covariance is zero")
        return sym_eigen(cov)
    s_b, s_w = scatter_fn(ds, subset)
    if not np.any(s_b):
        raise DegenerateData("between-class scatter is zero")
    if not np.any(s_w):
        raise DegenerateData("within-class scatter is zero")
    return whitened_gen_eigen(s_b, s_w)


def fit_basis(ds, subset, spec: MethodSpec) -> ProjectionBasis:
    """Fit the eigenvector bases ``spec`` needs from the ``subset`` images."""
    images, labels = _subset(ds, subset)
    spec.validate(images.shape[1:])
    if spec.family == "pca" and len(images) < 2:
        raise DegenerateData("PCA needs at least two training images")
    if spec.family == "lda" and len(np.unique(labels)) < 2:
        raise DegenerateData("LDA needs at least two classes")
    right = left = None
    if spec.uses_right:
        right = _solve_side(spec.family, pca_right_cov, lda_scatter_right, ds, subset)
    if spec.uses_left:
        left = _solve_side(spec.family, pca_left_cov, lda_scatter_left, ds, subset)
    return ProjectionBasis(spec, right=right, left=left)


def check_indices(indices, size: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise IndexOutOfRange("at least one eigenvector index is required")
    if idx.min() < 0 or idx.max() >= size:
        raise IndexOutOfRange(f"indices must lie in [0, {size})")
    if len(np.unique(idx)) != len(idx):
        raise DuplicateIndex("eigenvector indices must be distinct")
    return idx


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    spec: MethodSpec
    left_indices: Optional[tuple] = None
    right_indices: Optional[tuple] = None


def _selected(basis, left, right):
    spec = basis.spec
    u = v = None
    if spec.uses_left:
        if left is None:
            raise IndexOutOfRange(f"{spec.name} needs left indices")
        eig = basis.side("left")
        left = check_indices(left, len(eig))
        u = eig.eigenvectors[:, left]
    if spec.uses_right:
        if right is None:
            raise IndexOutOfRange(f"{spec.name} needs right indices")
        eig = basis.side("right")
        right = check_indices(right, len(eig))
        v = eig.eigenvectors[:, right]
    return u, v, left, right


def project_stack(images, basis: ProjectionBasis, left=None, right=None) -> np.ndarray:
    """Project a ``(M, m, n)`` stack; returns ``(M, rows, cols)`` features."""
    images = np.asarray(images, dtype=np.float64)
    u, v, _, _ = _selected(basis, left, right)
    out = images
    if v is not None:
        if images.shape[2] != v.shape[0]:
            raise DimensionMismatch(f"image width {images.shape[2]} vs basis {v.shape[0]}")
        out = out @ v
    if u is not None:
        if images.shape[1] != u.shape[0]:
            raise DimensionMismatch(f"image height {images.shape[1]} vs basis {u.shape[0]}")
        out = np.einsum("ik,mij->mkj", u, out)
    return out


def project(img, basis: ProjectionBasis, left=None, right=None) -> FeatureMatrix:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionMismatch("project expects one 2-D image")
    values = project_stack(img[None], basis, left, right)[0]
    _, _, left, right = _selected(basis, left, right)
    return FeatureMatrix(values, basis.spec,
                         None if left is None else tuple(int(i) for i in left),
                         None if right is None else tuple(int(i) for i in right))


def reconstruct(feat: FeatureMatrix, basis: ProjectionBasis) -> np.ndarray:
    """Map PCA features back to image space (``Y V^T`` or ``U Y``)."""
    spec = feat.spec
    if spec.family != "pca" or spec.scheme == "bilateral":
        raise UnsupportedScheme(f"reconstruction is only defined for R2DPCA/L2DPCA, not {spec.name}")
    if spec.scheme == "right":
        v = basis.side("right").eigenvectors[:, list(feat.right_indices)]
        return feat.values @ v.T
    u = basis.side("left").eigenvectors[:, list(feat.left_indices)]
    return u @ feat.values


# ---- serialization -------------------------------------------------------

def _pack_side(eig: Optional[EigenDecomposition]) -> bytes:
    if eig is None:
        return struct.pack("<B", 0)
    rows, cols = eig.eigenvectors.shape
    return (struct.pack("<BII", 1, rows, cols)
            + np.asarray(eig.eigenvalues, dtype="<f8").tobytes()
            + np.asarray(eig.eigenvectors, dtype="<f8").tobytes(order="C"))


def dump_basis(basis: ProjectionBasis) -> bytes:
    """Binary container: magic, version, method, then left and right sides
    (flag, shape, eigenvalues, row-major eigenvectors; little-endian f8)."""
    spec = basis.spec
    name = spec.name.encode("ascii")
    d2 = 0 if spec.d2 is None else spec.d2
    head = BASIS_MAGIC + struct.pack("<HB", BASIS_VERSION, len(name)) + name + struct.pack("<II", spec.d, d2)
    return head + _pack_side(basis.left) + _pack_side(basis.right)


def load_basis(blob: bytes) -> ProjectionBasis:
    if not blob.startswith(BASIS_MAGIC):
        raise MalformedHeader("not a facekit basis container")
    pos = len(BASIS_MAGIC)
    version, name_len = struct.unpack_from("<HB", blob, pos)
    if version != BASIS_VERSION:
        raise MalformedHeader(f"unsupported basis version {version}")
    pos += 3
    name = blob[pos:pos + name_len].decode("ascii")
    pos += name_len
    d, d2 = struct.unpack_from("<II", blob, pos)
    pos += 8
    spec = MethodSpec.from_name(name, d, d2 or None)

    sides = []
    for _ in range(2):
        (flag,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        if not flag:
            sides.append(None)
            continue
        rows, cols = struct.unpack_from("<II", blob, pos)
        pos += 8
        values = np.frombuffer(blob, dtype="<f8", count=cols, offset=pos).astype(np.float64)
        pos += 8 * cols
        vectors = np.frombuffer(blob, dtype="<f8", count=rows * cols, offset=pos)
        pos += 8 * rows * cols
        sides.append(EigenDecomposition(values, vectors.reshape(rows, cols).astype(np.float64)))
    return ProjectionBasis(spec, right=sides[1], left=sides[0])

