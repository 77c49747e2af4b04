"""Mini-batch AUC optimization for linear rankers.

Pairs of positive and negative examples are sampled in mini-batches, the
first and second moments of their differences are accumulated, and a
single elastic-net regularized quadratic program is solved for the weights.
"""

__version__ = "0.1.0"

from .data import (
    LabeledDataset,
    SparseExample,
    SplitSpec,
    load_libsvm,
    normalize_l2,
    parse_libsvm,
    serialize_libsvm,
    stratified_split,
)
from .errors import ConfigError, ConvergenceError, DataError, MBAError, NumericalError, ParseError
from .mba import MBAConfig, train_mba
from .metrics import AucReport, RocCurve, TTestResult, auc, evaluate, paired_ttest, roc_curve, score
from .model import RankerModel, RegularizationSpec
from .moments import MomentAccumulator, PairSampler, exact_full_pair_moments
from .solver import SolverOptions, objective, solve, solve_ridge_direct

__all__ = [
    "AucReport", "ConfigError", "ConvergenceError", "DataError", "LabeledDataset",
    "MBAConfig", "MBAError", "MomentAccumulator", "NumericalError", "PairSampler",
    "ParseError", "RankerModel", "RegularizationSpec", "RocCurve", "SolverOptions",
    "SparseExample", "SplitSpec", "TTestResult", "auc", "evaluate",
    "exact_full_pair_moments", "load_libsvm", "normalize_l2", "objective",
    "paired_ttest", "parse_libsvm", "roc_curve", "score", "serialize_libsvm", "solve",
    "solve_ridge_direct", "stratified_split", "train_mba",
]
