"""Bridge regression by local quadratic approximation, with GBIC and six
competing criteria for choosing (lambda, q)."""

__version__ = "0.1.0"

from .criteria import CRITERIA, CriterionValue, evaluate, gbic, hat_matrix
from .data import Dataset, StandardizationParams, generate_setting, load_pollution, standardize
from .estimator import BridgeFit, FitConfig, fit_bridge, fit_grid, log_likelihood, predict
from .penalty import Hyperparams
from .selection import Grid, SelectionResult, default_pollution_grid, default_simulation_grid, select

__all__ = [
    "CRITERIA", "CriterionValue", "evaluate", "gbic", "hat_matrix",
    "Dataset", "StandardizationParams", "generate_setting", "load_pollution", "standardize",
    "BridgeFit", "FitConfig", "fit_bridge", "fit_grid", "log_likelihood", "predict",
    "Hyperparams", "Grid", "SelectionResult", "default_pollution_grid", "default_simulation_grid",
    "select",
]
