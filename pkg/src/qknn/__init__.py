"""Quantile regression with a fused-lasso (total-variation) penalty on a K-NN graph."""

from .graph import (
    Dataset,
    KnnGraph,
    build_knn_graph,
    connected_components,
    incidence_apply,
    incidence_transpose_apply,
    predict,
)
from .model_selection import SelectionReport, bic, dof, select_lambda, sic
from .objective import dn2_loss, mse, pinball, quantile_objective
from .simulate import ScenarioSample, gen_scenario
from .solvers import (
    FitConfig,
    FitResult,
    admm_primal_update,
    check_optimality,
    fit_admm,
    fit_l2_baseline,
    fit_mm,
)
from .tv_prox import ProxOptions, fused_lasso_prox, weighted_laplacian_solve

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "KnnGraph",
    "build_knn_graph",
    "connected_components",
    "incidence_apply",
    "incidence_transpose_apply",
    "predict",
    "SelectionReport",
    "bic",
    "dof",
    "select_lambda",
    "sic",
    "dn2_loss",
    "mse",
    "pinball",
    "quantile_objective",
    "ScenarioSample",
    "gen_scenario",
    "FitConfig",
    "FitResult",
    "admm_primal_update",
    "check_optimality",
    "fit_admm",
    "fit_l2_baseline",
    "fit_mm",
    "ProxOptions",
    "fused_lasso_prox",
    "weighted_laplacian_solve",
    "__version__",
]
