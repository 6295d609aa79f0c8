"""Structure adaptive lasso: weighted-l1 regression with weights learned from
feature structure, plus AMP, state evolution and simulation tooling."""

__version__ = "0.1.0"

from .model import (
    C_U,
    CovariatePrior,
    DimensionMismatch,
    GroupPrior,
    LinearDataset,
    PartitionError,
    PointNormal,
    SalassoError,
    SolverConfig,
    StructureSpec,
    WeightVector,
    validate_dataset,
    validate_partition,
)
from .prox import check_kkt, fit_weighted_lasso, lambda_max, objective, soft_threshold
from .weights import update_weights, update_weights_covariate, update_weights_group, update_weights_unstructured
from .fit import CvResult, SalassoTrajectory, cross_validate, fit_salasso
from .amp import amp_lasso, amp_salasso_covariate, amp_salasso_group
from .state_evolution import QuadratureSpec, SETrace, optimal_alpha, se_lasso, se_salasso_covariate, se_salasso_group
from .metrics import mcc, mse, rmspe

__all__ = [
    "C_U", "CovariatePrior", "DimensionMismatch", "GroupPrior", "LinearDataset", "PartitionError", "PointNormal",
    "SalassoError", "SolverConfig", "StructureSpec", "WeightVector", "validate_dataset", "validate_partition",
    "check_kkt", "fit_weighted_lasso", "lambda_max", "objective", "soft_threshold",
    "update_weights", "update_weights_covariate", "update_weights_group", "update_weights_unstructured",
    "CvResult", "SalassoTrajectory", "cross_validate", "fit_salasso",
    "amp_lasso", "amp_salasso_covariate", "amp_salasso_group",
    "QuadratureSpec", "SETrace", "optimal_alpha", "se_lasso", "se_salasso_covariate", "se_salasso_group",
    "mcc", "mse", "rmspe",
]
