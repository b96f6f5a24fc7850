"""Anisotropic kernel density estimation with per-point bandwidth selection.

The estimator picks a separate bandwidth vector per evaluation point from
a dyadic lattice, driven entirely by the data; companion modules verify
the selector's pointwise error bound against exact quadrature, classify
minimax rate regimes, build hard synthetic densities, and run Monte-Carlo
risk experiments.
"""

__version__ = "0.1.0"

from .bandwidths import Bandwidth, BandwidthGrid, build_grid
from .densities import (
    TrueDensity,
    build_f_theta,
    build_perturbed,
    flat_top_density,
    sample,
    smooth_product_density,
    strong_maximal,
    tail_quasi_norm,
    vg_packing,
)
from .errors import (
    ConfigError,
    ConstructionFailureError,
    EfficiencyError,
    InvalidParameterError,
    NumericError,
    VerificationError,
)
from .estimator import (
    Dataset,
    EstimationSetup,
    KappaPolicy,
    PointwiseFit,
    build_dataset,
    estimate_on_grid,
    kappa_default,
    make_setup,
    select_and_estimate,
)
from .kernels import build_base, build_composite, build_majorant, build_product
from .oracle import (
    assert_oracle_inequality,
    bias,
    bias_bar,
    bias_norm_scaling,
    check_proportional,
    majorant_true,
    oracle_terms,
    residual_chi,
    residual_zeta,
)
from .quadrature import GridSpec
from .regimes import (
    ClassSpec,
    TailSpec,
    classify,
    classify_tail,
    embedding,
    theta_star,
)
from .risk import (
    ExperimentPlan,
    RiskReport,
    default_grid,
    fit_rate,
    lp_norm_on_grid,
    oracle_gap,
    risk_replicate,
    run_plan,
)

__all__ = [
    "__version__",
    "Bandwidth", "BandwidthGrid", "build_grid",
    "TrueDensity", "build_f_theta", "build_perturbed", "flat_top_density",
    "sample", "smooth_product_density", "strong_maximal", "tail_quasi_norm",
    "vg_packing",
    "ConfigError", "ConstructionFailureError", "EfficiencyError",
    "InvalidParameterError", "NumericError", "VerificationError",
    "Dataset", "EstimationSetup", "KappaPolicy", "PointwiseFit",
    "build_dataset", "estimate_on_grid", "kappa_default", "make_setup",
    "select_and_estimate",
    "build_base", "build_composite", "build_majorant", "build_product",
    "assert_oracle_inequality", "bias", "bias_bar", "bias_norm_scaling",
    "check_proportional", "majorant_true", "oracle_terms", "residual_chi",
    "residual_zeta",
    "GridSpec",
    "ClassSpec", "TailSpec", "classify", "classify_tail", "embedding",
    "theta_star",
    "ExperimentPlan", "RiskReport", "default_grid", "fit_rate",
    "lp_norm_on_grid", "oracle_gap", "risk_replicate", "run_plan",
]
