"""Subbagging adaptive LASSO: variable selection from subsample summaries."""

from .aggregate import AggregatedQuadratic, adaptive_weights, combine, merge, subbagging_loss
from .baseline import adaptive_lasso_full, fit_full, sandwich_variance
from .data import ArrayDataset, CsvSchema, load_csv
from .errors import (ConfigError, ConvergenceError, DataError, NonIdentifiableError,
                     NumericalError, SubbagError)
from .inference import infer, standard_errors, variance_estimator, wald_intervals
from .losses import Family, Observation
from .pipeline import analyze
from .solver import (LambdaPath, RegularizedFit, default_lambda_grid, sbic, select_lambda,
                     soft_threshold, solve_path, solve_penalized)
from .subsample import (SubbaggingPlan, SubsampleSummary, draw_subsample, fit_subsample,
                        run_plan)

__version__ = "0.1.0"
