"""Seeded generators for the signal-plus-noise models under study.

Each generator returns the observation together with its ground truth
(leading eigenpairs of the signal matrix), so experiments can measure
subspace errors without re-factorizing the signal.  Block-structured
signals get their eigenpairs from the small block core, which is exact
and avoids an n x n eigensolve.
"""

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from .linalg import as_matrix, svd_thin, _fix_column_signs
from .mmio import write_matrix_market
from .rng import RngStream, standard_normal


@dataclass
class SbmInstance:
    a: np.ndarray        # adjacency, symmetric binary
    p_mat: np.ndarray    # edge probabilities rho * B[tau_i, tau_j]
    tau: np.ndarray      # community labels in [0, K)
    u: np.ndarray        # leading d eigenvectors of p_mat
    lam: np.ndarray      # matching eigenvalues, descending |.|
    rho: float
    stream: RngStream


@dataclass
class CompletionInstance:
    t: np.ndarray        # rank-k symmetric signal
    t_hat: np.ndarray    # observed Omega o (T + N)
    omega: np.ndarray    # symmetric binary mask
    p: float
    sigma: float
    u: np.ndarray
    lam: np.ndarray
    stream: RngStream


@dataclass
class MissingPcaInstance:
    x_obs: np.ndarray    # Omega o (B F + N), d x m
    b: np.ndarray        # d x k factor loadings
    f: np.ndarray        # k x m factors
    p: float
    sigma: float
    u: np.ndarray        # left singular vectors of B (eigenvectors of B B^T)
    lam: np.ndarray      # eigenvalues of B B^T
    stream: RngStream


def _mirror_upper(full):
    """Symmetric matrix from the upper triangle (diagonal included) of a
    full square draw; the strict lower triangle of the draw is discarded."""
    up = np.triu(full)
    return up + np.triu(full, 1).T


def symmetric_bernoulli(n, prob, gen):
    """Symmetric 0/1 matrix with independent Bernoulli upper triangle.

    ``prob`` may be a scalar or an n x n matrix of per-entry probabilities.
    """
    hits = np.triu(gen.random((n, n)) < prob)
    return (hits | hits.T).astype(np.float64)


def symmetric_gaussian(n, sd, gen):
    """Symmetric matrix with iid N(0, sd^2) upper triangle."""
    return _mirror_upper(sd * standard_normal(gen, (n, n)))


def _block_eigenpairs(labels, core, n_blocks):
    """Eigenpairs of Z core Z^T for a membership matrix Z.

    Reduces to the n_blocks x n_blocks matrix D^(1/2) core D^(1/2) where D
    holds the block sizes, so the result is exact at any n.
    """
    counts = np.bincount(labels, minlength=n_blocks).astype(np.float64)
    root = np.sqrt(counts)
    small = root[:, None] * core * root[None, :]
    vals, vecs = np.linalg.eigh((small + small.T) / 2.0)
    order = np.lexsort((-vals, -np.abs(vals)))
    vals = vals[order]
    vecs = vecs[:, order]
    scale = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
    u = (vecs * scale[:, None])[labels, :]
    return vals, _fix_column_signs(u)


def gen_sbm(n, b, pi, rho, d, stream: RngStream, hollow_diagonal=False) -> SbmInstance:
    """Sample a K-block stochastic blockmodel graph with sparsity rho.

    Labels are iid from pi; edges (diagonal included) are independent
    Bernoulli(rho * B[tau_i, tau_j]), mirrored below the diagonal.  Set
    ``hollow_diagonal`` to zero out self-loops; the returned p_mat stays
    the full-rank-K signal either way.
    """
    b = as_matrix(b, "B")
    k_blocks = b.shape[0]
    if b.shape[1] != k_blocks:
        raise ValueError("B must be square")
    if np.max(np.abs(b - b.T)) > 1e-12:
        raise ValueError("B must be symmetric")
    if np.min(b) < 0.0 or np.max(b) > 1.0:
        raise ValueError("B entries must lie in [0, 1]")
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1 or pi.size != k_blocks:
        raise ValueError("pi must be a probability vector of length K")
    if np.min(pi) < 0.0 or abs(float(np.sum(pi)) - 1.0) > 1e-12:
        raise ValueError("pi must be nonnegative and sum to 1")
    if not 0.0 <= rho <= 1.0 or rho * float(np.max(b)) > 1.0 + 1e-15:
        raise ValueError("need rho in [0, 1] with rho * max(B) <= 1")
    if not 1 <= d <= k_blocks:
        raise ValueError(f"embedding dimension d must lie in [1, {k_blocks}]")
    if n < 1:
        raise ValueError("n must be positive")

    gen = stream.generator()
    cum = np.cumsum(pi)
    tau = np.minimum(np.searchsorted(cum, gen.random(n), side="right"), k_blocks - 1)
    p_mat = np.take(rho * b, tau[:, None] * k_blocks + tau[None, :])
    a = symmetric_bernoulli(n, p_mat, gen)
    if hollow_diagonal:
        np.fill_diagonal(a, 0.0)
    vals, u = _block_eigenpairs(tau, rho * b, k_blocks)
    return SbmInstance(
        a=a, p_mat=p_mat, tau=tau, u=u[:, :d], lam=vals[:d], rho=float(rho),
        stream=stream,
    )


def _homogeneous_core(k, gen, signal_scale):
    """Well-conditioned k x k core whose entries share one scale.

    Entries stay within a factor ~2.8 of each other, so the block signal
    Z C Z^T has min |T_ij| comparable to ||T||_max, and the spectrum stays
    well separated from zero.
    """
    base = np.ones((k, k)) + np.eye(k)
    if k > 1:
        w = 0.2 * (2.0 * gen.random((k, k)) - 1.0)
        base = base + (w + w.T) / 2.0
    return signal_scale * base / float(np.max(np.abs(base)))


def gen_completion(n, k, signal_scale, p, sigma, homogeneous, stream: RngStream) -> CompletionInstance:
    """Rank-k symmetric signal observed through a Bernoulli(p) mask plus
    iid N(0, sigma^2) noise.

    Homogeneous mode builds T from a balanced k-block membership times a
    well-conditioned core, giving entries of a single common scale with
    ||T||_max = signal_scale.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if k < 1 or n < k:
        raise ValueError("need 1 <= k <= n")
    if signal_scale <= 0.0:
        raise ValueError("signal_scale must be positive")

    gen = stream.generator()
    if homogeneous:
        labels = gen.permutation(np.arange(n) % k)
        core = _homogeneous_core(k, gen, signal_scale)
        t = core[np.ix_(labels, labels)]
        lam, u = _block_eigenpairs(labels, core, k)
    else:
        basis = np.linalg.qr(standard_normal(gen, (n, k)), mode="reduced")[0]
        basis = _fix_column_signs(basis)
        lam = signal_scale * n * np.linspace(1.0, 0.6, k)
        t = (basis * lam) @ basis.T
        t = (t + t.T) / 2.0
        u = basis
    omega = symmetric_bernoulli(n, p, gen)
    noise = symmetric_gaussian(n, sigma, gen) if sigma > 0 else np.zeros((n, n))
    t_hat = omega * (t + noise)
    return CompletionInstance(
        t=t, t_hat=t_hat, omega=omega, p=float(p), sigma=float(sigma),
        u=u[:, :k], lam=lam[:k], stream=stream,
    )


def gen_missing_pca(d, m, k, p, sigma, stream: RngStream) -> MissingPcaInstance:
    """Factor-model data B F + N observed through a Bernoulli(p) mask."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if not 1 <= k <= min(d, m):
        raise ValueError("need 1 <= k <= min(d, m)")
    gen = stream.generator()
    b = standard_normal(gen, (d, k))
    f = standard_normal(gen, (k, m))
    noise = sigma * standard_normal(gen, (d, m)) if sigma > 0 else np.zeros((d, m))
    omega = (gen.random((d, m)) < p).astype(np.float64)
    x_obs = omega * (b @ f + noise)
    u, s, _ = svd_thin(b)
    return MissingPcaInstance(
        x_obs=x_obs, b=b, f=f, p=float(p), sigma=float(sigma),
        u=u, lam=s ** 2, stream=stream,
    )


def edm_from_points(points) -> np.ndarray:
    """Squared-distance matrix D_ij = ||p_i - p_j||^2; rank <= dim + 2."""
    points = as_matrix(points, "points")
    sq = np.sum(points * points, axis=1)
    d_mat = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    d_mat = np.maximum((d_mat + d_mat.T) / 2.0, 0.0)
    np.fill_diagonal(d_mat, 0.0)
    return d_mat


def gen_edm(n, dim, box, stream: RngStream):
    """Squared-Euclidean-distance matrix of n uniform points in [0, box]^dim.

    Returns (d_mat, points).
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if n < 1 or box <= 0.0:
        raise ValueError("need n >= 1 and box > 0")
    gen = stream.generator()
    points = box * gen.random((n, dim))
    return edm_from_points(points), points


def gen_wigner(n, sigma_n, sub_gaussian_mode, stream: RngStream) -> np.ndarray:
    """Symmetric noise with iid mean-0, sd sigma_n upper-triangle entries.

    ``sub_gaussian_mode`` is "gaussian" or "bounded" (Rademacher +-sigma_n).
    """
    if sigma_n <= 0.0:
        raise ValueError("sigma_n must be positive")
    if sub_gaussian_mode not in ("gaussian", "bounded"):
        raise ValueError("sub_gaussian_mode must be 'gaussian' or 'bounded'")
    gen = stream.generator()
    if sub_gaussian_mode == "gaussian":
        return symmetric_gaussian(n, sigma_n, gen)
    signs = 2.0 * gen.integers(0, 2, size=(n, n)).astype(np.float64) - 1.0
    return _mirror_upper(sigma_n * signs)


def export_instance(instance, out_dir, prefix="instance"):
    """Write an instance's matrices as Matrix Market files plus a JSON
    sidecar with the sampling parameters and seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "master_seed": instance.stream.master_seed,
        "stream_id": instance.stream.stream_id,
    }
    if isinstance(instance, SbmInstance):
        write_matrix_market(out / f"{prefix}_adjacency.mm", instance.a)
        write_matrix_market(out / f"{prefix}_p_mat.mm", instance.p_mat)
        meta.update(tau=instance.tau.tolist(), rho=instance.rho)
    elif isinstance(instance, CompletionInstance):
        write_matrix_market(out / f"{prefix}_observed.mm", instance.t_hat)
        write_matrix_market(out / f"{prefix}_signal.mm", instance.t)
        meta.update(p=instance.p, sigma=instance.sigma)
    elif isinstance(instance, MissingPcaInstance):
        write_matrix_market(out / f"{prefix}_observed.mm", instance.x_obs)
        meta.update(p=instance.p, sigma=instance.sigma)
    else:
        raise TypeError(f"unsupported instance type {type(instance).__name__}")
    (out / f"{prefix}_meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
