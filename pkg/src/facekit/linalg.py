"""Dense symmetric eigensolvers and feature-matrix distances.

The symmetric solver is a cyclic Jacobi method.  Each sweep visits every
index pair once, grouped into n-1 rounds of disjoint pairs (round-robin
tournament order) so that a whole round is applied as one vectorized
rotation.  Matrices in this package are at most a couple of hundred rows,
where Jacobi is both fast enough and accurate to working precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (Asymmetric, DimensionMismatch, NoConvergence, NonFinite,
                     NonSquare, SingularAfterRidge, ZeroMatrix)

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100
ASYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue; column k of
    ``eigenvectors`` belongs to ``eigenvalues[k]``."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)


def as_matrix(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} has NaN or infinite entries")
    return a


def _check_symmetric(a):
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.T) > ASYMMETRY_TOL * scale:
        raise Asymmetric("matrix is not symmetric within 1e-9 relative")
    return (a + a.T) / 2.0


def _round_robin(n):
    """Rounds of disjoint index pairs covering every pair exactly once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    vectors = vectors.copy()
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _sorted_decomposition(values, vectors):
    order = np.argsort(-values, kind="stable")
    vectors = vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return EigenDecomposition(values[order].copy(), normalize_signs(vectors))


def sym_eigen(a, tol: float = DEFAULT_TOL, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Iterates until the off-diagonal Frobenius mass drops to
    ``tol * max(1, ||a||_F)``.  Raises :class:`NoConvergence` when
    ``max_sweeps`` sweeps are not enough.
    """
    a = _check_symmetric(as_matrix(a))
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return EigenDecomposition(np.diag(a).copy(), v)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin(n)
    off_mask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps + 1):
        off = np.sqrt(np.sum(a[off_mask] ** 2))
        if off <= threshold:
            return _sorted_decomposition(np.diag(a).copy(), v)
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p], a[:, q]
            a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
            ap, aq = a[p, :], a[q, :]
            a[p, :], a[q, :] = c[:, None] * ap - s[:, None] * aq, s[:, None] * ap + c[:, None] * aq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    raise NoConvergence(f"Jacobi did not converge within {max_sweeps} sweeps")


def default_ridge(s_w: np.ndarray) -> float:
    return 1e-6 * float(np.trace(s_w)) / s_w.shape[0]


def whitened_gen_eigen(s_b, s_w, ridge: float | None = None,
                       tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Solve ``s_b v = lam (s_w + ridge I) v`` by Cholesky whitening.

    With ``s_w + ridge I = L L^T`` the symmetric problem for
    ``L^-1 s_b L^-T`` is solved and its eigenvectors mapped back through
    ``L^-T``.  Returned vectors have unit norm but are not orthogonal.
    ``ridge=None`` uses ``1e-6 * tr(s_w) / n``.
    """
    s_b = _check_symmetric(as_matrix(s_b, "s_b"))
    s_w = _check_symmetric(as_matrix(s_w, "s_w"))
    if s_b.shape != s_w.shape:
        raise DimensionMismatch(f"s_b {s_b.shape} and s_w {s_w.shape} differ")
    if ridge is None:
        ridge = default_ridge(s_w)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    regularized = s_w + ridge * np.eye(s_w.shape[0])
    try:
        chol = np.linalg.cholesky(regularized)
    except np.linalg.LinAlgError as exc:
        raise SingularAfterRidge(f"s_w + {ridge:g} I is not positive definite") from exc
    if np.any(np.diag(chol) <= 0):
        raise SingularAfterRidge(f"s_w + {ridge:g} I is not positive definite")

    half = solve_triangular(chol, s_b, lower=True)
    whitened = solve_triangular(chol, half.T, lower=True)
    inner = sym_eigen((whitened + whitened.T) / 2.0, tol=tol)
    vectors = solve_triangular(chol.T, inner.eigenvectors, lower=False)
    values = np.clip(inner.eigenvalues, 0.0, None)
    return _sorted_decomposition(values, vectors)


def frobenius_distance(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def cosine_distance(a, b) -> float:
    """One minus the cosine similarity of the flattened matrices."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    if not np.any(a) or not np.any(b):
        raise ZeroMatrix("cosine distance is undefined for an all-zero matrix")
    # rescale first so tiny entries do not underflow in the norms
    a = a / np.max(np.abs(a))
    b = b / np.max(np.abs(b))
    sim = float(np.sum(a * b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.clip(1.0 - sim, 0.0, 2.0))


def distance_matrix(queries: np.ndarray, gallery: np.ndarray, metric: str) -> np.ndarray:
    """All query-to-gallery distances for stacked feature matrices.

    ``queries`` has shape ``(q, ...)`` and ``gallery`` ``(g, ...)`` with
    identical trailing shapes; the result is ``(q, g)``.
    """
    queries = np.asarray(queries, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if queries.shape[1:] != gallery.shape[1:]:
        raise DimensionMismatch(f"feature shapes {queries.shape[1:]} and {gallery.shape[1:]} differ")
    qf = queries.reshape(len(queries), -1)
    gf = gallery.reshape(len(gallery), -1)
    if metric == "frobenius":
        out = np.empty((len(qf), len(gf)))
        for i, row in enumerate(qf):
            out[i] = np.sqrt(np.sum((gf - row) ** 2, axis=1))
        return out
    if metric == "cosine":
        qn = np.linalg.norm(qf, axis=1)
        gn = np.linalg.norm(gf, axis=1)
        if np.any(qn == 0) or np.any(gn == 0):
            raise ZeroMatrix("cosine distance is undefined for an all-zero feature matrix")
        sim = (qf / qn[:, None]) @ (gf / gn[:, None]).T
        return np.clip(1.0 - sim, 0.0, 2.0)
    raise ValueError(f"unknown metric {metric!r}")
