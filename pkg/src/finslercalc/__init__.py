"""Finsler tensor calculus with dual-path verification of metric-change formulas."""

from .change import (
    BarredTensors,
    ChangeFrame,
    ChangeScalars,
    RegularityError,
    barred_angular,
    barred_cartan,
    barred_l,
    barred_metric,
    barred_metric_inverse,
    barred_metric_inverse_chain,
    barred_torsion_mixed,
    change_scalars,
    change_scalars_tau,
    rank_one_inverse,
    remark_identity_suite,
)
from .delta import (
    DeltaIngredients,
    DeltaTensors,
    berwald_delta,
    cartan_delta,
    delta_ingredients,
    delta_tensors,
    ingredient_values,
    nonlinear_delta,
    parallel_b_certificate,
    sandbox_generate,
    spray_delta,
)
from .harness import (
    SamplingError,
    Tolerances,
    VerificationConfig,
    VerificationReport,
    load_config,
    load_config_file,
    run_defect_scan,
    run_verify,
)
from .jets import (
    EvaluationDomainError,
    FiberPoint,
    Jet,
    ScalarField,
    fd_derivative,
    jet_eval,
    smooth_sqrt,
)
from .linalg import SingularMetricError
from .metrics import (
    ConfigError,
    HVectorData,
    HVectorSpec,
    MetricSpec,
    changed_metric_field,
    h_vector_defect,
    make_h_vector,
    metric_field,
    parse_h_vector,
    parse_metric,
)
from .tensors import (
    BaseTensors,
    ConnectionData,
    PointFrame,
    base_tensors,
    connection_data,
    h_cov_deriv,
    v_cov_deriv,
)

__all__ = [
    "BarredTensors",
    "BaseTensors",
    "ChangeFrame",
    "ChangeScalars",
    "ConfigError",
    "ConnectionData",
    "DeltaIngredients",
    "DeltaTensors",
    "EvaluationDomainError",
    "FiberPoint",
    "HVectorData",
    "HVectorSpec",
    "Jet",
    "MetricSpec",
    "PointFrame",
    "RegularityError",
    "SamplingError",
    "ScalarField",
    "SingularMetricError",
    "Tolerances",
    "VerificationConfig",
    "VerificationReport",
    "barred_angular",
    "barred_cartan",
    "barred_l",
    "barred_metric",
    "barred_metric_inverse",
    "barred_metric_inverse_chain",
    "barred_torsion_mixed",
    "base_tensors",
    "berwald_delta",
    "cartan_delta",
    "change_scalars",
    "change_scalars_tau",
    "changed_metric_field",
    "connection_data",
    "delta_ingredients",
    "delta_tensors",
    "fd_derivative",
    "h_cov_deriv",
    "h_vector_defect",
    "ingredient_values",
    "jet_eval",
    "load_config",
    "load_config_file",
    "make_h_vector",
    "metric_field",
    "nonlinear_delta",
    "parallel_b_certificate",
    "parse_h_vector",
    "parse_metric",
    "rank_one_inverse",
    "remark_identity_suite",
    "run_defect_scan",
    "run_verify",
    "sandbox_generate",
    "smooth_sqrt",
    "spray_delta",
    "v_cov_deriv",
]

__version__ = "0.1.0"
