"""AUC with half-credit ties, ROC curves, paired t-tests, linear scoring."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .data import LabeledDataset
from .errors import DataError
from .model import RankerModel


@dataclass(frozen=True)
class AucReport:
    auc: float
    n_pos: int
    n_neg: int
    tie_mass: float

    def to_dict(self):
        return asdict(self)

    @property
    def percent(self) -> str:
        return f"{100 * self.auc:.2f}"


@dataclass(frozen=True)
class RocCurve:
    false_alarm: np.ndarray
    detection: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.false_alarm.tolist(), self.detection.tolist()))

    def area(self) -> float:
        fa, de = self.false_alarm, self.detection
        return float(np.sum(np.diff(fa) * (de[1:] + de[:-1]) / 2.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["false_alarm", "detection"])
        for fa, de in self.points:
            wr.writerow([repr(fa), repr(de)])
        return buf.getvalue()


def _check_scores(scores_pos, scores_neg):
    sp_ = np.asarray(scores_pos, dtype=np.float64).ravel()
    sn = np.asarray(scores_neg, dtype=np.float64).ravel()
    if sp_.size == 0 or sn.size == 0:
        raise DataError("AUC needs at least one positive and one negative score")
    if np.isnan(sp_).any() or np.isnan(sn).any():
        raise DataError("NaN score")
    return sp_, sn


def _tie_pairs(sp_, sn) -> int:
    up, cp = np.unique(sp_, return_counts=True)
    un, cn = np.unique(sn, return_counts=True)
    _, ip, in_ = np.intersect1d(up, un, assume_unique=True, return_indices=True)
    return int(np.dot(cp[ip].astype(np.int64), cn[in_].astype(np.int64)))


def auc(scores_pos, scores_neg) -> AucReport:
    """Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2.

    Computed from the Mann-Whitney rank sum with average ranks for ties.
    """
    sp_, sn = _check_scores(scores_pos, scores_neg)
    n_pos, n_neg = sp_.size, sn.size
    ranks = stats.rankdata(np.concatenate([sp_, sn]), method="average")
    # Rank sums are integers or half-integers, so this U is exact in float64.
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    n_pairs = n_pos * n_neg
    return AucReport(float(u / n_pairs), n_pos, n_neg, _tie_pairs(sp_, sn) / n_pairs)


def roc_curve(scores_pos, scores_neg) -> RocCurve:
    """One point per distinct threshold, sweeping from high score to low."""
    sp_, sn = _check_scores(scores_pos, scores_neg)
    scores = np.concatenate([sp_, sn])
    is_pos = np.concatenate([np.ones(sp_.size), np.zeros(sn.size)])
    order = np.argsort(-scores, kind="mergesort")
    scores, is_pos = scores[order], is_pos[order]
    # Last index of each run of equal scores.
    ends = np.flatnonzero(np.r_[scores[1:] != scores[:-1], True])
    tp = np.cumsum(is_pos)[ends]
    fp = (ends + 1) - tp
    fa = np.r_[0.0, fp / sn.size]
    de = np.r_[0.0, tp / sp_.size]
    return RocCurve(fa, de)


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    dof: int
    significant_95: bool
    direction: str
    mean_diff: float = 0.0
    infinite: bool = False

    @property
    def marker(self) -> str:
        """Table marker from the first sample's point of view: better/worse."""
        if not self.significant_95:
            return ""
        return "•" if self.direction == "better" else "○"


def t_critical(dof: int, level: float = 0.95) -> float:
    """Two-sided Student-t critical value."""
    return float(stats.t.ppf(0.5 + level / 2.0, dof))


def paired_ttest(runs_a, runs_b, level: float = 0.95) -> TTestResult:
    """Paired two-sided t-test on ``a - b``; direction says whether ``a`` is better."""
    a = np.asarray(runs_a, dtype=np.float64)
    b = np.asarray(runs_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise DataError("paired t-test needs two equal-length samples of size >= 2")
    diff = a - b
    n = diff.size
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    dof = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, dof, False, "tie", 0.0)
        return TTestResult(math.copysign(math.inf, mean), dof, True,
                           "better" if mean > 0 else "worse", mean, infinite=True)
    t = mean / (sd / math.sqrt(n))
    significant = abs(t) > t_critical(dof, level)
    if not significant:
        direction = "tie"
    else:
        direction = "better" if t > 0 else "worse"
    return TTestResult(float(t), dof, bool(significant), direction, mean)


def score_matrix(w, X) -> np.ndarray:
    return np.asarray(X @ w).ravel()


def score(model: RankerModel, dataset: LabeledDataset):
    """Linear scores ``w^T x`` for positives and negatives."""
    if model.d < dataset.d:
        raise DataError(
            f"model dimension {model.d} is smaller than dataset dimension {dataset.d}"
        )
    if model.d > dataset.d:
        dataset = dataset.with_dimension(model.d)
    return score_matrix(model.w, dataset.X_pos), score_matrix(model.w, dataset.X_neg)


def evaluate(model: RankerModel, dataset: LabeledDataset) -> AucReport:
    return auc(*score(model, dataset))
