"""Tools for explaining linear accuracy trends across two test distributions."""

from .bounds import (
    BoundReport,
    corollary_bound,
    feasible_band,
    lower_bound_curve,
    prop1_bound,
    residual_from_accuracies,
    residual_from_triplets,
)
from .closeness import ClosenessParams, Segment, ViolationReport, check_closeness, fit_wedge, outlier_models
from .corrdata import AccuracyPairSet, CorrectnessMatrix, accuracy, align, load_matrix
from .events import (
    TripletDistribution,
    dominance_probability,
    dominance_table,
    enumerate_triplet_points,
    similarity,
    triplet_events,
)
from .gridbound import GridSearchConfig, halved_bound, max_residual_grid
from .trends import FitReport, compare_fits, inverse_normal_cdf, ols_fit, piecewise_fit, probit_fit

__version__ = "0.1.0"

__all__ = [
    "AccuracyPairSet",
    "BoundReport",
    "ClosenessParams",
    "CorrectnessMatrix",
    "FitReport",
    "GridSearchConfig",
    "Segment",
    "TripletDistribution",
    "ViolationReport",
    "accuracy",
    "align",
    "check_closeness",
    "compare_fits",
    "corollary_bound",
    "dominance_probability",
    "dominance_table",
    "enumerate_triplet_points",
    "feasible_band",
    "fit_wedge",
    "halved_bound",
    "inverse_normal_cdf",
    "load_matrix",
    "lower_bound_curve",
    "max_residual_grid",
    "ols_fit",
    "outlier_models",
    "piecewise_fit",
    "probit_fit",
    "prop1_bound",
    "residual_from_accuracies",
    "residual_from_triplets",
    "similarity",
    "triplet_events",
]
