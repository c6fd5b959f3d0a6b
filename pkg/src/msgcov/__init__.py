"""Covariance matrix estimation via g-modeling, with baselines and a benchmark harness."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .baselines import (
    LinearCoefs,
    adaptive_threshold_estimate,
    linear_risk_estimate,
    linear_risk_minimizers,
    lw_estimate,
    nercome_estimate,
    optimal_linear_estimate,
    oracle_rotation_invariant,
)
from .gmodel import (
    FitReport,
    SufficientStats,
    SupportGrid,
    build_support_grid,
    composite_loglik,
    em_fit,
    kmeans,
    log_lik_diag,
    log_lik_pair,
    msg_estimate,
    posterior_diag,
    posterior_offdiag,
)
from .linalg import (
    EigenPair,
    PairStats,
    SymmetricEstimate,
    center_columns,
    eigenvector_distance,
    pair_stats,
    sample_covariance,
    scaled_frobenius_loss,
    sym_eigen,
)
from .posdef import PdCorrectionConfig, correct_pd, project_psd
from .sim import ModelSpec, haar_orthogonal, make_sigma, sample_mvn
