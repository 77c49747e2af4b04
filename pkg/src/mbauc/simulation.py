"""Gaussian-mixture hypotheses and the likelihood-ratio (Neyman-Pearson) scorer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .data import LabeledDataset
from .errors import ConfigError
from .metrics import AucReport, auc


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    # Scalar variance (isotropic) or a full d x d covariance matrix.
    cov: float | np.ndarray = 1.0

    @property
    def isotropic(self) -> bool:
        return np.ndim(self.cov) == 0


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple[GaussianComponent, ...]
    d: int
    _chol: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.components:
            raise ConfigError("mixture needs at least one component")
        comps = []
        chols = []
        for c in self.components:
            mean = np.asarray(c.mean, dtype=np.float64).ravel()
            if mean.size != self.d:
                raise ConfigError(f"component mean has length {mean.size}, expected {self.d}")
            if not 0.0 < c.weight <= 1.0:
                raise ConfigError(f"component weight {c.weight} outside (0, 1]")
            if np.ndim(c.cov) == 0:
                cov = float(c.cov)
                if not cov > 0:
                    raise ConfigError("isotropic variance must be positive")
                chols.append(None)
            else:
                cov = np.asarray(c.cov, dtype=np.float64)
                if cov.shape != (self.d, self.d):
                    raise ConfigError("covariance matrix has wrong shape")
                try:
                    chols.append(np.linalg.cholesky(cov))
                except np.linalg.LinAlgError:
                    raise ConfigError("covariance matrix is not positive definite") from None
            comps.append(GaussianComponent(float(c.weight), mean, cov))
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"mixture weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", tuple(comps))
        object.__setattr__(self, "_chol", tuple(chols))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def mean(self) -> np.ndarray:
        return sum(c.weight * c.mean for c in self.components)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        which = rng.choice(len(self.components), size=n, p=self.weights)
        X = rng.standard_normal((n, self.d))
        for k, (c, L) in enumerate(zip(self.components, self._chol)):
            rows = which == k
            if L is None:
                X[rows] *= np.sqrt(c.cov)
            else:
                X[rows] = X[rows] @ L.T
            X[rows] += c.mean
        return X

    def log_density(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        terms = []
        for c, L in zip(self.components, self._chol):
            diff = X - c.mean
            if L is None:
                quad = np.einsum("ij,ij->i", diff, diff) / c.cov
                logdet = self.d * np.log(c.cov)
            else:
                sol = np.linalg.solve(L, diff.T)
                quad = np.einsum("ij,ij->j", sol, sol)
                logdet = 2.0 * np.log(np.diag(L)).sum()
            terms.append(np.log(c.weight) - 0.5 * (quad + logdet + self.d * np.log(2 * np.pi)))
        return logsumexp(np.vstack(terms), axis=0)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "components": [
                {"weight": c.weight, "mean": c.mean.tolist(),
                 "cov": c.cov if c.isotropic else np.asarray(c.cov).tolist()}
                for c in self.components
            ],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "MixtureSpec":
        d = int(rec["d"])
        comps = []
        for c in rec["components"]:
            mean = c["mean"]
            mean = np.full(d, float(mean)) if np.ndim(mean) == 0 else np.asarray(mean, dtype=float)
            cov = c.get("cov", 1.0)
            comps.append(GaussianComponent(float(c["weight"]), mean,
                                           cov if np.ndim(cov) == 0 else np.asarray(cov, dtype=float)))
        return cls(tuple(comps), d)


@dataclass(frozen=True)
class HypothesisPair:
    """``h0`` generates label 0 (negatives), ``h1`` label 1 (positives)."""

    h0: MixtureSpec
    h1: MixtureSpec
    imbalance: float = 0.9  # probability of label 0

    def __post_init__(self):
        if self.h0.d != self.h1.d:
            raise ConfigError("hypotheses have different dimensions")
        if not 0.0 < self.imbalance < 1.0:
            raise ConfigError("imbalance must be in (0, 1)")

    @property
    def d(self) -> int:
        return self.h0.d

    def to_dict(self) -> dict:
        return {"h0": self.h0.to_dict(), "h1": self.h1.to_dict(), "imbalance": self.imbalance}

    @classmethod
    def from_dict(cls, rec: dict) -> "HypothesisPair":
        return cls(MixtureSpec.from_dict(rec["h0"]), MixtureSpec.from_dict(rec["h1"]),
                   float(rec.get("imbalance", 0.9)))

    @classmethod
    def load(cls, path) -> "HypothesisPair":
        return cls.from_dict(json.loads(Path(path).read_text()))


_PRESETS = {
    1: (((1.0, -0.1),), ((1.0, 0.1),)),
    2: (((0.9, -0.1), (0.1, 0.1)), ((0.1, -0.1), (0.9, 0.1))),
    3: (((0.8, -0.1), (0.1, 0.0), (0.1, 0.1)), ((0.1, -0.1), (0.1, 0.0), (0.8, 0.1))),
}


def _mixture(spec: Sequence[tuple[float, float]], d: int) -> MixtureSpec:
    return MixtureSpec(tuple(GaussianComponent(w, np.full(d, m), 1.0) for w, m in spec), d)


def preset(k: int, d: int = 100, imbalance: float = 0.9) -> HypothesisPair:
    """The symmetric 1-, 2- and 3-component mixtures with identity covariances.

    Every mean is a scalar replicated across all ``d`` coordinates.
    """
    if k not in _PRESETS:
        raise ConfigError(f"preset k must be 1, 2 or 3, got {k}")
    if d < 1:
        raise ConfigError("d must be >= 1")
    neg, pos = _PRESETS[k]
    return HypothesisPair(_mixture(neg, d), _mixture(pos, d), imbalance)


def sample_arrays(pair: HypothesisPair, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """``(X_pos, X_neg)`` with binomial labels, P(label 0) = imbalance."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    n_neg = int((rng.random(n) < pair.imbalance).sum())
    X_neg = pair.h0.sample(n_neg, rng)
    X_pos = pair.h1.sample(n - n_neg, rng)
    return X_pos, X_neg


def sample(pair: HypothesisPair, n: int, seed, name: str = "mixture") -> LabeledDataset:
    X_pos, X_neg = sample_arrays(pair, n, seed)
    return LabeledDataset.from_dense(X_pos, X_neg, name=name)


def np_scores(pair: HypothesisPair, X) -> np.ndarray:
    """Log-likelihood ratio ``log p1(x) - log p0(x)`` for each row of ``X``."""
    return pair.h1.log_density(X) - pair.h0.log_density(X)


def np_score(pair: HypothesisPair, x) -> float:
    return float(np_scores(pair, np.asarray(x, dtype=np.float64)[None, :])[0])


def np_auc(pair: HypothesisPair, n_test: int, seed) -> AucReport:
    if n_test < 2:
        raise ConfigError("n_test must be >= 2")
    X_pos, X_neg = sample_arrays(pair, n_test, seed)
    return auc(np_scores(pair, X_pos), np_scores(pair, X_neg))


def subsample(dataset: LabeledDataset, ratio: float, seed) -> LabeledDataset:
    """Per-class subsample without replacement.

    Each class keeps ``round(ratio * n_class)`` examples, at least one, so a
    small ratio never produces a single-class training set.
    """
    if not 0.0 < ratio <= 1.0:
        raise ConfigError("sample ratio must be in (0, 1]")
    if ratio == 1.0:
        return dataset
    rng = np.random.default_rng(seed)

    def pick(n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        keep = min(n, max(1, int(np.floor(ratio * n + 0.5))))
        return np.sort(rng.choice(n, size=keep, replace=False))

    pos = pick(dataset.n_pos)
    return dataset.subset(pos, pick(dataset.n_neg))
