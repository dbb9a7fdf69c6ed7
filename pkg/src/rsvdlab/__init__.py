"""Randomized-SVD laboratory.

Repeated-sampling randomized SVD with power iterations, subspace
distances, signal-plus-noise generators, downstream applications
(spectral clustering, matrix completion with entrywise confidence
intervals, missing-data PCA), closed-form reference quantities, and a
deterministic Monte-Carlo experiment harness.
"""

from .rng import RngStream, gaussian_matrix, stable_hash64
from .linalg import (
    MatrixNorms,
    RankDeficiencyError,
    SpectrumPair,
    norms,
    qr_thin,
    svd_thin,
    sym_eig,
)
from .sketch import (
    RsvdOutput,
    SketchConfig,
    power_sketch,
    rs_rsvd_asym,
    rs_rsvd_sym,
    rs_rsvd_sym_chain,
)
from .subspace import AlignmentResult, d2, d2_inf, procrustes_align, sin_theta_norm
from .models import (
    CompletionInstance,
    MissingPcaInstance,
    SbmInstance,
    gen_completion,
    gen_edm,
    gen_missing_pca,
    gen_sbm,
    gen_wigner,
)
from .applications import (
    ClusteringResult,
    CompletionResult,
    EntryCI,
    entry_ci,
    entry_ci_batch,
    exact_complete,
    match_labels,
    rsvd_complete,
    rsvd_missing_pca,
    rsvd_spectral_cluster,
)
from .theory import (
    RateModel,
    RateVerdict,
    clt_gamma_sbm,
    power_diff_expansion,
    rate_exponent,
    vstar_oracle,
)
from .harness import (
    ExperimentPlan,
    ReplicateRecord,
    ci_coverage,
    clt_coverage,
    ellipse_coverage,
    emit_csv,
    load_plan,
    rate_regression,
    rate_slopes,
    run_plan,
)

__version__ = "0.1.0"
