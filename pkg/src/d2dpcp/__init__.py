"""Permanental Cox process models for D2D underlay interference and coverage."""

from d2dpcp.random_field import (
    FieldRealization,
    GridSpec,
    SquaredExponentialKernel,
    build_covariance,
    kernel_eval,
    sample_chi2_field,
    sample_grf,
)
from d2dpcp.point_process import (
    AnnulusWindow,
    PointPattern,
    RectWindow,
    intensity_measure,
    sample_cox,
    sample_mh_fixed_n,
    sample_sppp,
)
from d2dpcp.summary_stats import (
    SummaryCurve,
    g_hat,
    k_closed,
    k_hat,
    l_closed,
    pair_correlation_pcp,
)
from d2dpcp.ec_geometry import (
    DomainGeometry,
    ExcursionSummary,
    ec_density_chi2,
    ec_density_chi2_j0,
    empirical_ec,
    expected_ec,
    flag_coefficient,
    lk_ball,
    lk_rectangle,
)
from d2dpcp.cluster_inference import (
    ClumpingParams,
    expected_cluster_volume,
    extent_probability,
    g_pcp,
    g_sppp,
)
from d2dpcp.coverage import (
    CoverageResult,
    NetworkConfig,
    coverage_closed_alpha4,
    coverage_integral,
    interferer_density,
    path_integral_constant,
    simulate_coverage_mc,
)

__version__ = "0.1.0"
