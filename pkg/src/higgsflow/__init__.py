"""Donaldson functional and Hermitian-Yang-Mills heat flow for Higgs bundles
over flat complex tori, at desk scale.

The package discretizes a torus C/(Z + tau Z) on a periodic grid with
lattice-gauge link phases carrying the background fluxes, builds Higgs bundle
configurations on top, and provides the mean curvature of the Hitchin-Simpson
connection, the Donaldson functional (path integral and eigenvalue closed
form), the heat flow h' = -(K - c h) with convergence monitors, and the
second-fundamental-form decomposition for exact sequences.

Set HIGGSFLOW_THREADS to cap the threads numerical backends may use.
"""

import os as _os

if "HIGGSFLOW_THREADS" in _os.environ:
    _cap = _os.environ["HIGGSFLOW_THREADS"]
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMBA_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)

from .bundle import (
    BlockSpec,
    EndField,
    HiggsBundleConfig,
    build_config,
    direct_sum,
    dual_bundle,
    integrability_residual,
    preset,
    tensor_product,
)
from .catalog import PresetDescriptor, Verdict, expected_behavior, verdict_constant
from .donaldson import (
    FunctionalReport,
    MetricPath,
    closed_form_L,
    eval_L,
    geodesic_path,
    linear_path,
    psi,
    q1_density,
    q2_along_path,
    sampled_path,
    variation_checks,
)
from .errors import (
    CflError,
    FlowAbortError,
    HiggsFlowError,
    PositivityError,
    SolverError,
    ValidationError,
)
from .fieldio import read_field, write_field
from .flow import (
    FlowOpts,
    FlowState,
    RunRecord,
    analyze_run,
    dt_max,
    flow_step,
    heat_inequality_sup,
    run_flow,
)
from .geometry import (
    TorusGeometry,
    TwistPattern,
    build_torus,
    differentiate,
    harmonic_forms,
    integrate,
    lambda_contract,
    poisson_solve,
)
from .metric import (
    CurvatureBundle,
    HermitianMetric,
    box_tilde,
    chern_connection,
    conformal_change,
    curvature11,
    degree_slope_c,
    dual_metric,
    higgs_adjoint,
    hym_residual,
    inner_product,
    normalize_to_hym,
    tensor_metric,
)
from .sequences import (
    FlagSpec,
    decomposition_check,
    second_fundamental_form,
    split_metrics,
)

__version__ = "0.1.0"
