"""Dense decompositions and norms used by every other module.

Thin QR, thin SVD, and the symmetric eigensolver are LAPACK-backed (via
numpy) but wrapped with the conventions the rest of the package relies
on: validated finite input, deterministic sign conventions, magnitude
ordering for eigenvalues, and explicit rank-deficiency errors.
"""

from typing import NamedTuple

import numpy as np

from .rng import RngStream, standard_normal

#: Maximum size accepted by the dense symmetric eigensolver.
SYM_EIG_MAX_N = 4096


class RankDeficiencyError(ValueError):
    """Raised when a factorization meets a numerically rank-deficient input.

    ``column`` is the 0-based offending column (QR), ``iteration`` the
    1-based power-iteration step (sketching), when known.
    """

    def __init__(self, message, column=None, iteration=None):
        super().__init__(message)
        self.column = column
        self.iteration = iteration


class SpectrumPair(NamedTuple):
    values: np.ndarray   # sorted by descending |value|
    vectors: np.ndarray  # orthonormal columns, one per value


class MatrixNorms(NamedTuple):
    spectral: float
    frobenius: float
    two_to_inf: float
    max: float


def as_matrix(a, name="matrix") -> np.ndarray:
    """Validate and return ``a`` as a 2-d float64 array with finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def orthonormality_defect(q) -> float:
    q = np.asarray(q, dtype=np.float64)
    k = q.shape[1]
    return float(np.max(np.abs(q.T @ q - np.eye(k))))


def require_orthonormal(q, tol=1e-10, name="basis") -> np.ndarray:
    q = as_matrix(q, name)
    if q.shape[0] < q.shape[1]:
        raise ValueError(f"{name} must be tall (rows >= cols), got {q.shape}")
    defect = orthonormality_defect(q)
    if defect > tol:
        raise ValueError(f"{name} is not orthonormal: defect {defect:.3e} > {tol:.1e}")
    return q


def _fix_column_signs(u, companion=None, tol=1e-8):
    """Make the first significantly nonzero entry of each column of ``u``
    nonnegative; flip the matching column of ``companion`` alongside."""
    u = u.copy()
    companion = None if companion is None else companion.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        peak = np.max(np.abs(col))
        if peak == 0.0:
            continue
        idx = np.argmax(np.abs(col) > tol * peak)
        if col[idx] < 0.0:
            u[:, j] = -col
            if companion is not None:
                companion[:, j] = -companion[:, j]
    return u if companion is None else (u, companion)


def qr_thin(a, rcond=1e-12):
    """Thin QR with nonnegative R diagonal.

    Raises RankDeficiencyError (with the offending column index) when a
    diagonal entry of R falls below ``rcond`` times the Frobenius norm of
    the input.
    """
    a = as_matrix(a, "QR input")
    rows, cols = a.shape
    if rows < cols:
        raise ValueError(f"QR input must be tall, got {rows}x{cols}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.sign(np.diagonal(r)).copy()
    signs[signs == 0.0] = 1.0
    q = q * signs
    r = r * signs[:, None]
    scale = float(np.linalg.norm(a))
    bad = np.flatnonzero(np.abs(np.diagonal(r)) <= rcond * scale)
    if bad.size:
        j = int(bad[0])
        raise RankDeficiencyError(
            f"rank-deficient QR input: R[{j},{j}] below {rcond:g} * ||A||_F",
            column=j,
        )
    return q, r


def svd_thin(y):
    """Thin SVD y = U diag(s) V^T with descending s and deterministic signs.

    Wide inputs are transposed internally, so U always has y.shape[0] rows.
    """
    y = as_matrix(y, "SVD input")
    transposed = y.shape[0] < y.shape[1]
    work = y.T if transposed else y
    u, s, vt = np.linalg.svd(work, full_matrices=False)
    v = vt.T
    u, v = _fix_column_signs(u, v)
    if transposed:
        u, v = v, u
    return u, s, v


def singular_values(y) -> np.ndarray:
    y = as_matrix(y, "input")
    return np.linalg.svd(y, compute_uv=False)


def sym_eig(s, tol=1e-10) -> SpectrumPair:
    """Eigendecomposition of a symmetric matrix, sorted by descending |value|.

    Magnitude ties are broken by placing the positive eigenvalue first.
    Inputs larger than SYM_EIG_MAX_N or asymmetric beyond ``tol`` are
    rejected.
    """
    s = as_matrix(s, "symmetric input")
    n, m = s.shape
    if n != m:
        raise ValueError(f"expected a square matrix, got {n}x{m}")
    if n > SYM_EIG_MAX_N:
        raise ValueError(f"dense eigensolver limited to {SYM_EIG_MAX_N} rows, got {n}")
    asym = float(np.max(np.abs(s - s.T)))
    if asym > tol:
        raise ValueError(f"input is not symmetric: max |S - S^T| = {asym:.3e}")
    vals, vecs = np.linalg.eigh((s + s.T) / 2.0)
    order = np.lexsort((-vals, -np.abs(vals)))
    vals = vals[order]
    vecs = _fix_column_signs(vecs[:, order])
    return SpectrumPair(values=vals, vectors=vecs)


_POWER_ITER_STREAM = RngStream(0x5EED0F0D, 7)


def spectral_norm(a, rel_tol=1e-10, max_iter=100_000) -> float:
    """Largest singular value via power iteration on the smaller Gram matrix.

    Deterministic: the starting vector comes from a fixed internal stream.
    """
    a = as_matrix(a, "input")
    gram = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    n = gram.shape[0]
    v = standard_normal(_POWER_ITER_STREAM.generator(), (n,))
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.ones(n)
        nv = np.sqrt(n)
    v /= nv
    prev = 0.0
    for _ in range(max_iter):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = float(v @ (gram @ v))
        if abs(est - prev) <= rel_tol * max(est, 1e-300):
            prev = est
            break
        prev = est
    return float(np.sqrt(max(prev, 0.0)))


def norms(a) -> MatrixNorms:
    """Spectral, Frobenius, max-row-l2 (two-to-inf) and max-entry norms."""
    a = as_matrix(a, "input")
    return MatrixNorms(
        spectral=spectral_norm(a),
        frobenius=float(np.linalg.norm(a)),
        two_to_inf=float(np.sqrt(np.max(np.sum(a * a, axis=1)))),
        max=float(np.max(np.abs(a))),
    )
