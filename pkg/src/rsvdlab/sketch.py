"""Repeated-sampling randomized SVD with power iterations.

The symmetric driver sketches M_hat^g G for a_n independent Gaussian
blocks G_a and keeps the block whose k-th sketched singular value is
largest; the asymmetric driver does the same with (M M^T)^g M G.  All
a_n blocks are carved out of one combined Gaussian draw so the data
matrix is traversed only g (resp. 2g+1) times, and every multiply is
followed by a thin QR so the iterated powers never overflow: the sketch
singular values are recovered from the accumulated product of R factors.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import (
    RankDeficiencyError,
    as_matrix,
    orthonormality_defect,
    singular_values,
    svd_thin,
    _fix_column_signs,
)
from .rng import RngStream, gaussian_matrix

LOW_RANK_MODES = ("none", "one_sided", "symmetrized")

_SYM_TOL = 1e-10
_COLLAPSE_RCOND = 1e-13


@dataclass(frozen=True)
class SketchConfig:
    """Inputs of the repeated-sampling sketch.

    k: target rank; k_tilde: sketch width (>= k); a_n: number of repeated
    sketches; g: power-iteration count; stream: randomness source.
    """

    k: int
    k_tilde: int
    a_n: int
    g: int
    stream: RngStream

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k_tilde < self.k:
            raise ValueError("k_tilde must be >= k")
        if self.a_n < 1:
            raise ValueError("a_n must be >= 1")
        if self.g < 1:
            raise ValueError("g must be >= 1")

    def validate_for(self, n_cols: int):
        if self.k_tilde > n_cols:
            raise ValueError(f"k_tilde={self.k_tilde} exceeds matrix dimension {n_cols}")
        if self.a_n * self.k_tilde > n_cols:
            raise ValueError(
                f"combined sketch width a_n*k_tilde={self.a_n * self.k_tilde} "
                f"exceeds matrix dimension {n_cols}"
            )


@dataclass
class RsvdOutput:
    u_hat_g: np.ndarray         # n x k orthonormal
    sigma_tilde: np.ndarray     # k approximate singular values, descending
    sigma_k_sketch: float       # winning sigma_k of the sketched matrix
    chosen_sketch: int          # index of the winning block in [0, a_n)
    low_rank: Optional[np.ndarray] = None


def _qr_step(y, iteration):
    """Thin QR that tolerates trailing rank collapse.

    Exactly low-rank inputs leave trailing R diagonals at roundoff level;
    that is expected (the sketch width may exceed the rank) and harmless
    since Q R = Y still holds.  Only a total collapse (the whole iterate
    vanishing) is an error.
    """
    scale = float(np.linalg.norm(y))
    q, r = np.linalg.qr(y, mode="reduced")
    signs = np.sign(np.diagonal(r)).copy()
    signs[signs == 0.0] = 1.0
    q = q * signs
    r = r * signs[:, None]
    if scale == 0.0 or np.max(np.abs(np.diagonal(r))) <= _COLLAPSE_RCOND * scale:
        raise RankDeficiencyError(
            f"sketch collapsed to numerical rank 0 at power iteration {iteration}",
            iteration=iteration,
        )
    return q, r


def _check_symmetric(m_hat, name="M_hat"):
    m_hat = as_matrix(m_hat, name)
    n = m_hat.shape[0]
    if m_hat.shape[1] != n:
        raise ValueError(f"{name} must be square, got {m_hat.shape}")
    asym = float(np.max(np.abs(m_hat - m_hat.T)))
    if asym > _SYM_TOL * max(1.0, float(np.max(np.abs(m_hat)))):
        raise ValueError(f"{name} is not symmetric: max asymmetry {asym:.3e}")
    return m_hat


def _power_iters(m_hat, g_mat, g: int):
    q, rprod = _qr_step(m_hat @ g_mat, iteration=1)
    for it in range(2, g + 1):
        q, r = _qr_step(m_hat @ q, iteration=it)
        rprod = r @ rprod
    return q, rprod


def power_sketch(m_hat, g_mat, g: int):
    """Re-orthonormalized power iterations: Q Rprod = M_hat^g G.

    Returns (Q, Rprod) where Rprod is the ordered product of per-iteration
    R factors, so the singular values of M_hat^g G equal those of Rprod.
    """
    m_hat = _check_symmetric(m_hat)
    g_mat = as_matrix(g_mat, "G")
    if g_mat.shape[0] != m_hat.shape[0]:
        raise ValueError(f"G must have {m_hat.shape[0]} rows, got {g_mat.shape[0]}")
    if g < 1:
        raise ValueError("g must be >= 1")
    return _power_iters(m_hat, g_mat, g)


def _power_iters_asym(m_hat, g_mat, g: int):
    """(M M^T)^g M G via alternating multiplies, QR after each one."""
    q, rprod = _qr_step(m_hat @ g_mat, iteration=1)
    for j in range(1, g + 1):
        q2, r2 = _qr_step(m_hat.T @ q, iteration=2 * j)
        q, r3 = _qr_step(m_hat @ q2, iteration=2 * j + 1)
        rprod = r3 @ (r2 @ rprod)
    return q, rprod


def combined_sketch(n: int, cfg: SketchConfig) -> np.ndarray:
    """One n x (a_n * k_tilde) Gaussian draw covering all blocks."""
    return gaussian_matrix(n, cfg.a_n * cfg.k_tilde, cfg.stream)


def _select_winner(rprods, k):
    """Index, sigma_k, and R product of the block maximizing the k-th
    sketched singular value; ties go to the lowest block index."""
    best = None
    for a, rprod in enumerate(rprods):
        svals = singular_values(rprod)
        sig_k = float(svals[k - 1]) if k <= svals.size else 0.0
        if best is None or sig_k > best[0]:
            best = (sig_k, a, rprod)
    return best[1], best[0], best[2]


def _extract_output(m_hat, q_all, rprods, k, k_tilde, low_rank_mode):
    chosen, sig_k, rprod = _select_winner(rprods, k)
    p, s_all, _ = svd_thin(rprod)
    if s_all[0] <= 0.0 or s_all[k - 1] <= s_all[0] * max(rprod.shape) * np.finfo(np.float64).eps:
        raise RankDeficiencyError(
            f"target rank k={k} exceeds the numerical rank of the sketch"
        )
    q = q_all[:, chosen * k_tilde:(chosen + 1) * k_tilde]
    u = _fix_column_signs(q @ p[:, :k])
    if orthonormality_defect(u) > 1e-10:
        raise RankDeficiencyError("extracted singular vectors lost orthonormality")
    proj = u.T @ m_hat
    sigma_tilde = singular_values(proj)
    low_rank = None
    if low_rank_mode == "one_sided":
        low_rank = u @ proj
    elif low_rank_mode == "symmetrized":
        b = u @ proj
        low_rank = (b + b.T) / 2.0
    return RsvdOutput(
        u_hat_g=u,
        sigma_tilde=sigma_tilde,
        sigma_k_sketch=sig_k,
        chosen_sketch=chosen,
        low_rank=low_rank,
    )


def _chain_outputs(m_hat, g_star, k, k_tilde, a_n, g_list, low_rank_mode):
    """Run the block power chain once up to max(g_list), snapshotting the
    selected output at every requested g.

    All blocks advance through one combined multiply per iteration (a
    single pass over the data matrix); each block is then re-orthonormalized
    independently, so the per-block states match running the blocks in
    isolation.
    """
    wanted = sorted(set(int(g) for g in g_list))
    if wanted[0] < 1:
        raise ValueError("all g must be >= 1")
    g_max = wanted[-1]
    rprods = [None] * a_n
    current = g_star
    outputs = {}
    for it in range(1, g_max + 1):
        y = m_hat @ current
        current = np.empty_like(g_star)
        for a in range(a_n):
            sl = slice(a * k_tilde, (a + 1) * k_tilde)
            q_a, r_a = _qr_step(y[:, sl], iteration=it)
            rprods[a] = r_a if it == 1 else r_a @ rprods[a]
            current[:, sl] = q_a
        if it in wanted:
            outputs[it] = _extract_output(m_hat, current, rprods, k, k_tilde,
                                          low_rank_mode)
    return outputs


def rs_rsvd_sym_chain(m_hat, cfg: SketchConfig, g_list,
                      low_rank_mode: str = "none") -> dict:
    """Outputs for several power counts from one sketch draw and one chain.

    Equivalent to calling rs_rsvd_sym once per g with the same config (the
    iterates at step g do not depend on later steps), but each power of the
    data matrix is applied only once.  Returns {g: RsvdOutput}.
    """
    if low_rank_mode not in LOW_RANK_MODES:
        raise ValueError(f"low_rank_mode must be one of {LOW_RANK_MODES}")
    m_hat = _check_symmetric(m_hat)
    n = m_hat.shape[0]
    cfg.validate_for(n)
    g_star = combined_sketch(n, cfg)
    return _chain_outputs(m_hat, g_star, cfg.k, cfg.k_tilde, cfg.a_n,
                          g_list, low_rank_mode)


def rs_rsvd_sym(m_hat, cfg: SketchConfig, low_rank_mode: str = "none") -> RsvdOutput:
    """Repeated-sampling randomized SVD of a symmetric matrix.

    Runs g re-orthonormalized power iterations on each of the a_n sketch
    blocks (carved out of one combined Gaussian draw), keeps the block
    maximizing sigma_k of the sketched matrix, and reads the approximate
    singular values off U^T M_hat.  ``low_rank_mode`` selects the optional
    approximation: "one_sided" gives U U^T M_hat, "symmetrized" its
    symmetric average.
    """
    return rs_rsvd_sym_chain(m_hat, cfg, [cfg.g], low_rank_mode)[cfg.g]


def rs_rsvd_asym(m_hat, cfg: SketchConfig) -> RsvdOutput:
    """Repeated-sampling randomized SVD for a rectangular matrix.

    Sketches (M M^T)^g M G_a, so the data is traversed 2g+1 times; the
    output approximates the k leading left singular vectors.
    """
    m_hat = as_matrix(m_hat, "M_hat")
    n1, n2 = m_hat.shape
    cfg.validate_for(n2)
    g_star = gaussian_matrix(n2, cfg.a_n * cfg.k_tilde, cfg.stream)
    kt = cfg.k_tilde
    q_all = np.empty((n1, cfg.a_n * kt))
    rprods = []
    for a in range(cfg.a_n):
        q, rprod = _power_iters_asym(m_hat, g_star[:, a * kt:(a + 1) * kt], cfg.g)
        q_all[:, a * kt:(a + 1) * kt] = q
        rprods.append(rprod)
    out = _extract_output(m_hat, q_all, rprods, cfg.k, kt, "none")
    return out
