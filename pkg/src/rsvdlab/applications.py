"""Downstream inference built on the randomized sketch: spectral
clustering for community detection, matrix completion with entrywise
confidence intervals, and PCA from partially observed data."""

from dataclasses import dataclass
from itertools import permutations
from typing import Optional

import numpy as np

from .clustering import cluster_rows
from .linalg import as_matrix, sym_eig
from .sketch import SketchConfig, RsvdOutput, rs_rsvd_sym
from .stats import normal_quantile_two_sided


@dataclass
class ClusteringResult:
    tau_hat: np.ndarray
    u_hat_g: np.ndarray
    exact_recovery: Optional[bool] = None
    error_rate: Optional[float] = None


@dataclass
class CompletionResult:
    t_hat_g: np.ndarray
    u_hat_g: np.ndarray
    mode: str
    p_used: float
    rsvd: Optional[RsvdOutput] = None


@dataclass
class EntryCI:
    i: int
    j: int
    estimate: float
    v_hat: float
    lo: float
    hi: float
    alpha: float


def rsvd_spectral_cluster(a, d, n_clusters, cfg: SketchConfig,
                          clusterer="kmeans", truth=None) -> ClusteringResult:
    """Cluster graph nodes from the sketched leading eigenvectors.

    Runs the symmetric sketch on the adjacency matrix with target rank d,
    then groups the embedding rows with K-means or K-medians seeded from a
    stream derived from cfg.stream.  When ``truth`` labels are supplied the
    result carries the permutation-invariant recovery flag and error rate.
    """
    a = as_matrix(a, "adjacency")
    vals = np.unique(a)
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise ValueError("adjacency must be binary")
    if d > cfg.k_tilde:
        raise ValueError("embedding dimension d must be <= k_tilde")
    cfg_d = SketchConfig(k=d, k_tilde=cfg.k_tilde, a_n=cfg.a_n, g=cfg.g,
                         stream=cfg.stream)
    out = rs_rsvd_sym(a, cfg_d)
    tau_hat = cluster_rows(out.u_hat_g, n_clusters,
                           cfg.stream.child("clustering"), method=clusterer)
    result = ClusteringResult(tau_hat=tau_hat, u_hat_g=out.u_hat_g)
    if truth is not None:
        _, exact, err = match_labels(tau_hat, np.asarray(truth), n_clusters)
        result.exact_recovery = exact
        result.error_rate = err
    return result


def match_labels(tau_hat, tau, n_clusters=None):
    """Best label permutation between an estimated and a reference
    clustering.

    Returns (permuted labels, exact flag, error rate).  Exhaustive over
    permutations of up to 8 labels via the K x K confusion matrix.
    """
    tau_hat = np.asarray(tau_hat, dtype=np.int64)
    tau = np.asarray(tau, dtype=np.int64)
    if tau_hat.shape != tau.shape:
        raise ValueError("label vectors must have equal length")
    if n_clusters is None:
        n_clusters = int(max(tau_hat.max(), tau.max())) + 1
    if n_clusters > 8:
        raise ValueError("exhaustive matching supports at most 8 labels")
    n = tau_hat.size
    confusion = np.zeros((n_clusters, n_clusters), dtype=np.int64)
    np.add.at(confusion, (tau_hat, tau), 1)
    best_perm, best_hits = None, -1
    for perm in permutations(range(n_clusters)):
        hits = int(sum(confusion[src, dst] for src, dst in enumerate(perm)))
        if hits > best_hits:
            best_hits, best_perm = hits, perm
    lookup = np.array(best_perm, dtype=np.int64)
    permuted = lookup[tau_hat]
    error_rate = 1.0 - best_hits / n
    return permuted, bool(best_hits == n), float(error_rate)


def estimate_sampling_rate(t_hat, mask=None) -> float:
    """Observed fraction of entries; zeros count as missing when no mask
    is given (ambiguous only if the signal itself has exact zeros)."""
    t_hat = as_matrix(t_hat, "observed matrix")
    if mask is not None:
        mask = as_matrix(mask, "mask")
        if mask.shape != t_hat.shape:
            raise ValueError("mask shape must match the observed matrix")
        frac = float(np.mean(mask != 0.0))
    else:
        frac = float(np.mean(t_hat != 0.0))
    if frac <= 0.0:
        raise ValueError("estimated sampling rate is zero")
    return frac


def _completion_inputs(t_hat, p, mode, mask):
    t_hat = as_matrix(t_hat, "observed matrix")
    if isinstance(p, str):
        if p != "auto":
            raise ValueError("p must be a probability or 'auto'")
        p_used = estimate_sampling_rate(t_hat, mask)
    else:
        p_used = float(p)
        if not 0.0 < p_used <= 1.0:
            raise ValueError("p must lie in (0, 1]")
    if mode not in ("one_sided", "symmetrized"):
        raise ValueError("mode must be 'one_sided' or 'symmetrized'")
    return t_hat, p_used


def rsvd_complete(t_hat, p, k, cfg: SketchConfig, mode="one_sided",
                  mask=None) -> CompletionResult:
    """Low-rank completion of a partially observed symmetric matrix.

    Scales the observation by 1/p, sketches it, and projects onto the
    estimated singular subspace: one_sided returns U U^T (T_hat / p),
    symmetrized its symmetric average.  ``p`` may be the string "auto" to
    estimate the sampling rate from the data (or the supplied mask).
    """
    t_hat, p_used = _completion_inputs(t_hat, p, mode, mask)
    cfg_k = SketchConfig(k=k, k_tilde=cfg.k_tilde, a_n=cfg.a_n, g=cfg.g,
                         stream=cfg.stream)
    out = rs_rsvd_sym(t_hat / p_used, cfg_k, low_rank_mode=mode)
    return CompletionResult(
        t_hat_g=out.low_rank, u_hat_g=out.u_hat_g, mode=mode,
        p_used=p_used, rsvd=out,
    )


def exact_complete(t_hat, p, k, mode="one_sided", mask=None) -> CompletionResult:
    """Completion baseline using the exact k leading (by magnitude)
    eigenvectors of the rescaled observation instead of the sketch."""
    t_hat, p_used = _completion_inputs(t_hat, p, mode, mask)
    m_hat = t_hat / p_used
    u = sym_eig(m_hat).vectors[:, :k]
    b = u @ (u.T @ m_hat)
    t_hat_g = b if mode == "one_sided" else (b + b.T) / 2.0
    return CompletionResult(t_hat_g=t_hat_g, u_hat_g=u, mode=mode,
                            p_used=p_used, rsvd=None)


def _ci_context(result: CompletionResult, t_hat):
    zeta = result.u_hat_g @ result.u_hat_g.T
    e_hat = result.t_hat_g - t_hat / result.p_used
    return zeta, e_hat


def entry_ci_batch(result: CompletionResult, t_hat, indices, alpha) -> list:
    """Normal-approximation confidence intervals for selected entries.

    The variance proxy for entry (i, j) combines the squared residual
    matrix with the squared projector: sum_{l != j} E2[i,l] z2[l,j]
    + sum_{l != i} E2[l,j] z2[i,l] + E2[i,j] (z[i,i] + z[j,j])^2, all
    computed from sketch outputs alone.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    t_hat = as_matrix(t_hat, "observed matrix")
    zeta, e_hat = _ci_context(result, t_hat)
    e2 = e_hat * e_hat
    z2 = zeta * zeta
    z = normal_quantile_two_sided(alpha)
    out = []
    for i, j in indices:
        i, j = int(i), int(j)
        v = float(e2[i, :] @ z2[:, j]) - e2[i, j] * z2[j, j]
        v += float(e2[:, j] @ z2[i, :]) - e2[i, j] * z2[i, i]
        v += e2[i, j] * (zeta[i, i] + zeta[j, j]) ** 2
        v = max(v, 0.0)
        est = float(result.t_hat_g[i, j])
        half = z * np.sqrt(v)
        out.append(EntryCI(i=i, j=j, estimate=est, v_hat=v,
                           lo=est - half, hi=est + half, alpha=alpha))
    return out


def entry_ci(result: CompletionResult, t_hat, p, i, j, alpha) -> EntryCI:
    """Single-entry confidence interval; ``p`` must match the completion."""
    if abs(float(p) - result.p_used) > 1e-12:
        raise ValueError("p disagrees with the completion result")
    return entry_ci_batch(result, t_hat, [(i, j)], alpha)[0]


def missing_pca_gram(x_obs, p) -> np.ndarray:
    """Debiased second-moment surrogate: off-diagonal of p^-2 X X^T."""
    x_obs = as_matrix(x_obs, "observed data")
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    gram = x_obs @ x_obs.T
    q = (gram + gram.T) / (2.0 * p * p)
    np.fill_diagonal(q, 0.0)
    return q


def rsvd_missing_pca(x_obs, p, k, cfg: SketchConfig) -> np.ndarray:
    """Principal subspace from partially observed data.

    Forms the diagonal-deleted Gram surrogate and sketches it; returns the
    estimated d x k basis.
    """
    q = missing_pca_gram(x_obs, p)
    cfg_k = SketchConfig(k=k, k_tilde=cfg.k_tilde, a_n=cfg.a_n, g=cfg.g,
                         stream=cfg.stream)
    return rs_rsvd_sym(q, cfg_k).u_hat_g
