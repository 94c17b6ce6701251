"""Model-robust direct effect estimation under confounder-mediator ambiguity."""

__version__ = "0.1.0"

from .crossfit import assign_folds, fit_nuisances, score
from .estimator import (
    EstimateResult,
    UnionTestResult,
    estimate_lambda,
    estimate_psi,
    union_test,
    wald_p,
)
from .glm import DesignSpec, fit_logistic, fit_ols, predict_prob
from .sensitivity import bound, gap_binary, sensitivity_report, tv_binary
from .simulate import CASES, draw, run_study, truth
from .survey import estimate_psi_weighted, hajek_mean, psu_bootstrap, six_year_weight
from .tabular import ColumnSpec, Dataset, SurveyDesign, is_binary_focal, load_csv, write_csv

__all__ = [
    "CASES", "ColumnSpec", "Dataset", "DesignSpec", "EstimateResult", "SurveyDesign",
    "UnionTestResult", "assign_folds", "bound", "draw", "estimate_lambda", "estimate_psi",
    "estimate_psi_weighted", "fit_logistic", "fit_nuisances", "fit_ols", "gap_binary",
    "hajek_mean", "is_binary_focal", "load_csv", "predict_prob", "psu_bootstrap", "run_study",
    "score", "sensitivity_report", "six_year_weight", "truth", "tv_binary", "union_test",
    "wald_p", "write_csv",
]
