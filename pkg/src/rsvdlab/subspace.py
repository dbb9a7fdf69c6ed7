"""Distances between subspaces spanned by orthonormal bases.

The d2 / d2-to-inf distances are evaluated at the Frobenius-Procrustes
minimizer (the rotation that best aligns the bases in Frobenius norm).
They upper-bound the definitional infimum over all orthogonal alignments
and stay within sqrt(2) times the sin-theta norm.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, svd_thin


@dataclass(frozen=True)
class AlignmentResult:
    w: np.ndarray             # k x k orthogonal alignment
    residual_spectral: float  # ||u1 - u2 w||_2
    residual_two_inf: float   # ||u1 - u2 w||_{2->inf}


def _check_pair(u1, u2):
    u1 = as_matrix(u1, "u1")
    u2 = as_matrix(u2, "u2")
    if u1.shape != u2.shape:
        raise ValueError(f"shape mismatch: {u1.shape} vs {u2.shape}")
    return u1, u2


def procrustes_align(u1, u2) -> AlignmentResult:
    """Orthogonal w minimizing ||u1 - u2 w||_F, with alignment residuals."""
    u1, u2 = _check_pair(u1, u2)
    p, _, v = svd_thin(u2.T @ u1)
    w = p @ v.T
    diff = u1 - u2 @ w
    return AlignmentResult(
        w=w,
        residual_spectral=float(np.linalg.norm(diff, 2)),
        residual_two_inf=float(np.sqrt(np.max(np.sum(diff * diff, axis=1)))),
    )


def d2(u1, u2) -> float:
    """Spectral-norm residual after Frobenius-Procrustes alignment."""
    return procrustes_align(u1, u2).residual_spectral


def d2_inf(u1, u2) -> float:
    """Max-row-norm residual after Frobenius-Procrustes alignment."""
    return procrustes_align(u1, u2).residual_two_inf


def sin_theta_norm(u1, u2) -> float:
    """||sin Theta(u1, u2)|| = sqrt(1 - sigma_min(u1^T u2)^2)."""
    u1, u2 = _check_pair(u1, u2)
    s = np.linalg.svd(u1.T @ u2, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return float(np.sqrt(max(0.0, 1.0 - float(np.min(s)) ** 2)))


def principal_angles(u1, u2) -> np.ndarray:
    """Principal angles in radians, ascending; cosines clamped to [0, 1]."""
    u1, u2 = _check_pair(u1, u2)
    s = np.linalg.svd(u1.T @ u2, compute_uv=False)
    return np.arccos(np.clip(np.sort(s)[::-1], 0.0, 1.0))
