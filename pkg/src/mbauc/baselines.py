"""Stochastic-gradient reference methods.

* OLR: online logistic regression, one example per update.
* MB-PSL / MB-PHL: mini-batch gradient descent on the pairwise squared or
  hinge loss, drawing pairs with the same zipped sampler MBA uses.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Literal

import numpy as np
import scipy.sparse as sp

from .data import LabeledDataset
from .errors import ConfigError
from .model import RankerModel, RegularizationSpec
from .moments import PairSampler, pair_differences

# (update index, loss before the update, weights before the update; do not mutate)
StepCallback = Callable[[int, float, np.ndarray], None]


@dataclass(frozen=True)
class SgdConfig:
    step_schedule: Literal["inv_sqrt", "constant"] = "inv_sqrt"
    c: float = 1.0
    epochs: int = 1
    rounds: int | None = None  # pairwise methods; None means one pass, ceil(N / B)
    B: int = 64
    lambda2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.step_schedule not in ("inv_sqrt", "constant"):
            raise ConfigError(f"unknown step schedule {self.step_schedule!r}")
        if not self.c > 0:
            raise ConfigError("step constant c must be positive")
        if self.B < 1 or self.epochs < 1 or (self.rounds is not None and self.rounds < 1):
            raise ConfigError("B, epochs and rounds must be >= 1")
        if self.lambda2 < 0:
            raise ConfigError("lambda2 must be non-negative")

    def step(self, t: int) -> float:
        """Step size for update ``t`` (1-based)."""
        return self.c / math.sqrt(t) if self.step_schedule == "inv_sqrt" else self.c


# ---------------------------------------------------------------------------
# logistic regression

def logistic_loss(w, x, y: int, lambda2: float = 0.0) -> float:
    m = y * float(np.dot(w, x))
    return float(np.logaddexp(0.0, -m)) + 0.5 * lambda2 * float(np.dot(w, w))


def logistic_gradient(w, x, y: int, lambda2: float = 0.0) -> np.ndarray:
    m = y * float(np.dot(w, x))
    # d/dm log(1 + e^{-m}) = -1 / (1 + e^{m})
    coef = -y * _sigmoid(-m)
    return coef * np.asarray(x, dtype=np.float64) + lambda2 * np.asarray(w, dtype=np.float64)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def train_olr(dataset: LabeledDataset, config: SgdConfig = SgdConfig(),
              on_step: StepCallback | None = None) -> RankerModel:
    dataset.require_both_classes()
    X = sp.vstack([dataset.X_pos, dataset.X_neg], format="csr")
    y = np.r_[np.ones(dataset.n_pos), -np.ones(dataset.n_neg)]
    indptr, indices, data = X.indptr, X.indices, X.data
    w = np.zeros(dataset.d)
    n = X.shape[0]
    lam2 = config.lambda2
    t = 0
    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        for k in order.tolist():
            lo, hi = indptr[k], indptr[k + 1]
            idx, val = indices[lo:hi], data[lo:hi]
            yk = y[k]
            m = yk * float(w[idx] @ val)
            t += 1
            if on_step is not None:
                on_step(t, float(np.logaddexp(0.0, -m)), w)
            eta = config.step(t)
            if lam2:
                w *= 1.0 - eta * lam2
            w[idx] += (eta * yk * _sigmoid(-m)) * val
    return RankerModel(
        w=w, reg=RegularizationSpec(0.0, lam2), pairs_seen=0, seed=config.seed,
        solver={"method": "olr", "step_schedule": config.step_schedule, "c": config.c,
                "rounds": t, "epochs": config.epochs},
    )


# ---------------------------------------------------------------------------
# pairwise mini-batch gradient descent

def phi_psl(t):
    return (1.0 - np.asarray(t)) ** 2


def phi_phl(t):
    return np.maximum(0.0, 1.0 - np.asarray(t))


def dphi_psl(t):
    return -2.0 * (1.0 - np.asarray(t, dtype=np.float64))


def dphi_phl(t):
    """Subgradient of the hinge; 0 at the kink t = 1 (a valid element of [-1, 0])."""
    return np.where(np.asarray(t) < 1.0, -1.0, 0.0)


_LOSSES = {"psl": (phi_psl, dphi_psl), "phl": (phi_phl, dphi_phl)}


def pairwise_gradient(w, Z, loss: str = "psl") -> np.ndarray:
    """Mean over rows ``z`` of ``Z`` of the (sub)gradient of ``phi(w^T z)``."""
    _, dphi = _LOSSES[loss]
    t = np.asarray(Z @ w).ravel()
    coef = dphi(t) / t.size
    return np.asarray(Z.T @ coef).ravel()


def default_rounds(dataset: LabeledDataset, B: int) -> int:
    return max(1, math.ceil(len(dataset) / B))


def train_mb_pairwise(dataset: LabeledDataset, config: SgdConfig = SgdConfig(),
                      loss: Literal["psl", "phl"] = "psl",
                      on_step: StepCallback | None = None) -> RankerModel:
    loss = loss.lower()
    if loss not in _LOSSES:
        raise ConfigError(f"unknown pairwise loss {loss!r}")
    dataset.require_both_classes()
    phi, dphi = _LOSSES[loss]
    rounds = config.rounds or default_rounds(dataset, config.B)
    sampler = PairSampler(config.seed, config.B, rounds)
    w = np.zeros(dataset.d)
    batch_loss = float("nan")
    for t, (i, j) in enumerate(sampler.rounds(dataset.n_pos, dataset.n_neg), start=1):
        Z = pair_differences(dataset, i, j)
        s = np.asarray(Z @ w).ravel()
        batch_loss = float(phi(s).mean())
        if on_step is not None:
            on_step(t, batch_loss, w)
        g = np.asarray(Z.T @ (dphi(s) / s.size)).ravel()
        w -= config.step(t) * (g + config.lambda2 * w)
    return RankerModel(
        w=w, reg=RegularizationSpec(0.0, config.lambda2), pairs_seen=sampler.S,
        seed=config.seed,
        solver={"method": f"mb-{loss}", "step_schedule": config.step_schedule, "c": config.c,
                "rounds": rounds, "B": config.B, "final_batch_loss": batch_loss},
    )


def config_dict(config: SgdConfig) -> dict:
    return asdict(config)
