"""Mini-batch AUC optimization: sample pairs, accumulate moments, solve once."""

from __future__ import annotations

from dataclasses import dataclass

from .data import LabeledDataset
from .errors import ConfigError
from .model import RankerModel, RegularizationSpec
from .moments import (
    MomentAccumulator,
    PairSampler,
    accumulate,
    accumulate_all_pairs,
    exact_full_pair_moments,
)
from .solver import SolverOptions, solve, solve_ridge_direct


@dataclass(frozen=True)
class MBAConfig:
    B: int = 1000
    T: int = 100
    lambda1: float = 0.0
    lambda2: float = 1e-2
    seed: int = 0
    # "sample": B*T zipped pairs; "exact": closed-form moments over all pairs;
    # "enumerate": absorb every pair explicitly.
    moments: str = "sample"
    solver: str = "cd"  # "cd" or "direct" (ridge only)
    allow_singular: bool = False

    def __post_init__(self):
        if self.moments not in ("sample", "exact", "enumerate"):
            raise ConfigError(f"unknown moments mode {self.moments!r}")
        if self.solver not in ("cd", "direct"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.solver == "direct" and (self.lambda1 != 0 or not self.lambda2 > 0):
            raise ConfigError("direct solver handles ridge only (lambda1 = 0, lambda2 > 0)")

    @property
    def reg(self) -> RegularizationSpec:
        return RegularizationSpec(self.lambda1, self.lambda2)


def estimate_moments(dataset: LabeledDataset, config: MBAConfig) -> MomentAccumulator:
    if config.moments == "exact":
        return exact_full_pair_moments(dataset)
    if config.moments == "enumerate":
        return accumulate_all_pairs(dataset)
    return accumulate(dataset, PairSampler(config.seed, config.B, config.T))


def fit_moments(acc: MomentAccumulator, config: MBAConfig) -> RankerModel:
    if config.solver == "direct":
        model = solve_ridge_direct(acc, config.lambda2, seed=config.seed)
    else:
        model = solve(acc, config.reg, SolverOptions(allow_singular=config.allow_singular),
                      seed=config.seed)
    model.solver.update({"B": config.B, "T": config.T, "moments": config.moments})
    return model


def train_mba(dataset: LabeledDataset, config: MBAConfig = MBAConfig()) -> RankerModel:
    dataset.require_both_classes()
    return fit_moments(estimate_moments(dataset, config), config)
