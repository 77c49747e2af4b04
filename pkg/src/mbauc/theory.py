"""Sample-complexity bound, Bernstein tail bounds, and an empirical harness
that measures how fast sampled-pair solutions approach the all-pairs one."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .data import LabeledDataset
from .errors import ConfigError, NumericalError
from .model import RegularizationSpec
from .moments import MomentAccumulator, PairSampler, accumulate, accumulate_all_pairs, exact_full_pair_moments
from .solver import SolverOptions, objective, solve


@dataclass(frozen=True)
class BoundInputs:
    d: int
    R_x: float
    R_w: float
    sigma_norm: float
    epsilon: float
    p: float

    def __post_init__(self):
        for name in ("d", "R_x", "R_w", "sigma_norm", "epsilon"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be finite and strictly positive, got {v}")
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"failure probability p must be in (0, 1), got {self.p}")


def sample_bound_terms(b: BoundInputs) -> tuple[float, float]:
    """The quadratic-term and linear-term sample requirements, before the max."""
    eps2 = 3.0 * b.epsilon ** 2
    quad = math.log(4.0 * b.d / b.p) * (48.0 * b.R_w ** 2 * b.sigma_norm + 16.0 * b.epsilon * b.R_w) * b.R_x / eps2
    lin = math.log(4.0 / b.p) * (48.0 * b.R_w * b.sigma_norm + 16.0 * b.epsilon * math.sqrt(b.R_x * b.R_w)) / eps2
    return quad, lin


def required_samples(b: BoundInputs) -> int:
    """Pairs sufficient for the sampled solution to be close with prob. >= 1 - p."""
    quad, lin = sample_bound_terms(b)
    s = max(quad, lin)
    if not math.isfinite(s):
        raise NumericalError(f"sample bound is not finite ({s})")
    return int(math.ceil(s))


def bernstein_tail(gamma: float, S: int, b: BoundInputs,
                   which: Literal["matrix", "scalar"] = "matrix") -> float:
    """Upper bound on P(|deviation| > gamma) after S pairs, clipped to [0, 1].

    ``matrix`` bounds the spectral norm of the second-moment error;
    ``scalar`` bounds the cross term between weight and mean errors.
    """
    if not gamma > 0 or S < 1:
        raise ConfigError("gamma must be > 0 and S >= 1")
    if which == "matrix":
        denom = 4.0 * b.R_x * b.sigma_norm + (8.0 / 3.0) * gamma * b.R_x
        pref = 2.0 * b.d
    elif which == "scalar":
        denom = 4.0 * b.R_w * b.sigma_norm + (8.0 / 3.0) * gamma * math.sqrt(b.R_x * b.R_w)
        pref = 2.0
    else:
        raise ConfigError(f"unknown tail kind {which!r}")
    return float(min(1.0, pref * math.exp(-S * gamma ** 2 / denom)))


def spectral_norm_psd(A: np.ndarray, rtol: float = 1e-9, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a PSD matrix by power iteration."""
    d = A.shape[0]
    v = np.random.default_rng(seed).standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = A @ v
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - lam) <= rtol * new:
            return new
        lam = new
    return lam


def symmetric_norm(A: np.ndarray) -> float:
    """Spectral norm of a symmetric (possibly indefinite) matrix."""
    ev = np.linalg.eigvalsh(A)
    return float(max(abs(ev[0]), abs(ev[-1])))


def ridge_weight_bound(mu: np.ndarray, lambda2: float) -> float:
    """``(|mu|_2 / lambda2)^2``: bound on ``|w|_2^2`` implied by the l2 penalty."""
    if not lambda2 > 0:
        return math.inf
    return float((np.linalg.norm(mu) / lambda2) ** 2)


@dataclass(frozen=True)
class ConcentrationSample:
    S: int
    trial: int
    delta_sigma_norm: float
    delta_mu_norm: float
    w_gap: float
    objective_gap: float
    cross_term: float  # (w_N - w_S)^T (mu_N - mu_S)
    sandwich: float  # Delta(w_N) - Delta(w_S), an upper bound on objective_gap
    w_sq_norm: float
    R_w: float


@dataclass
class ConcentrationReport:
    samples: list[ConcentrationSample]
    sigma_norm: float
    w_N: np.ndarray
    n_pairs: int
    reg: RegularizationSpec
    summary: list[dict] = field(default_factory=list)

    def by_S(self, S: int) -> list[ConcentrationSample]:
        return [s for s in self.samples if s.S == S]

    def records(self) -> list[dict]:
        return [asdict(s) for s in self.samples]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        cols = ["S", "median_w_gap", "p90_w_gap", "median_delta_sigma"]
        wr = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
        wr.writeheader()
        for row in self.summary:
            wr.writerow({k: (f"{row[k]:.10g}" if k != "S" else row[k]) for k in cols})
        return buf.getvalue()


def _summarize(samples: Sequence[ConcentrationSample]) -> list[dict]:
    out = []
    for S in sorted({s.S for s in samples}):
        rows = [s for s in samples if s.S == S]
        row = {"S": S, "trials": len(rows)}
        for key in ("w_gap", "delta_sigma_norm", "delta_mu_norm", "objective_gap"):
            vals = np.array([getattr(r, key) for r in rows])
            row[f"median_{key}"] = float(np.median(vals))
            row[f"p90_{key}"] = float(np.percentile(vals, 90))
        row["median_delta_sigma"] = row["median_delta_sigma_norm"]
        out.append(row)
    return out


def _split_batches(S: int, max_batch: int) -> tuple[int, int]:
    if S <= max_batch:
        return S, 1
    for B in range(max_batch, 0, -1):
        if S % B == 0:
            return B, S // B
    return 1, S


def _trial_seed(seed: int, S: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, S, trial]).generate_state(1, dtype=np.uint64)[0])


def compare_to_full(acc_N: MomentAccumulator, w_N: np.ndarray, acc_S: MomentAccumulator,
                    reg: RegularizationSpec, trial: int, opts: SolverOptions) -> ConcentrationSample:
    w_S = solve(acc_S, reg, opts).w
    sig_N, sig_S = acc_N.sigma, acc_S.sigma
    d_sigma = sig_S - sig_N
    d_mu = acc_N.mu - acc_S.mu

    def delta(w):
        return 0.5 * w @ d_sigma @ w + w @ d_mu

    return ConcentrationSample(
        S=acc_S.count,
        trial=trial,
        delta_sigma_norm=symmetric_norm(d_sigma),
        delta_mu_norm=float(np.linalg.norm(d_mu)),
        w_gap=float(np.linalg.norm(w_N - w_S)),
        objective_gap=objective(w_S, acc_N, reg) - objective(w_N, acc_N, reg),
        cross_term=float((w_N - w_S) @ d_mu),
        sandwich=float(delta(w_N) - delta(w_S)),
        w_sq_norm=float(w_S @ w_S),
        R_w=ridge_weight_bound(acc_S.mu, reg.lambda2),
    )


def measure_concentration(dataset: LabeledDataset, reg: RegularizationSpec,
                          S_grid: Sequence[int | str], trials: int, seed: int = 0,
                          max_batch: int = 1000,
                          opts: SolverOptions = SolverOptions()) -> ConcentrationReport:
    """Fit on S sampled pairs ``trials`` times per grid point and compare with
    the all-pairs solution. A grid entry of ``"all"`` absorbs every pair once."""
    if not reg.lambda2 > 0:
        raise ConfigError("concentration harness needs lambda2 > 0 for a unique minimizer")
    dataset.require_both_classes()
    acc_N = exact_full_pair_moments(dataset)
    w_N = solve(acc_N, reg, opts).w
    samples = []
    for S in S_grid:
        if S == "all":
            samples.append(compare_to_full(acc_N, w_N, accumulate_all_pairs(dataset), reg, 0, opts))
            continue
        S = int(S)
        B, T = _split_batches(S, max_batch)
        for trial in range(trials):
            acc_S = accumulate(dataset, PairSampler(_trial_seed(seed, S, trial), B, T))
            samples.append(compare_to_full(acc_N, w_N, acc_S, reg, trial, opts))
    report = ConcentrationReport(samples, spectral_norm_psd(acc_N.sigma), w_N,
                                 acc_N.count, reg)
    report.summary = _summarize(samples)
    return report


def tail_check(report: ConcentrationReport, gammas: Sequence[float], R_x: float,
               d: int) -> list[dict]:
    """Empirical P(|Sigma_S - Sigma_N|_2 > gamma) against the matrix tail bound."""
    b = BoundInputs(d=d, R_x=R_x, R_w=1.0, sigma_norm=report.sigma_norm, epsilon=1.0, p=0.5)
    rows = []
    for S in sorted({s.S for s in report.samples}):
        norms = np.array([s.delta_sigma_norm for s in report.by_S(S)])
        for g in gammas:
            rows.append({
                "S": S, "gamma": float(g),
                "empirical": float(np.mean(norms > g)),
                "bound": bernstein_tail(g, S, b, "matrix"),
            })
    return rows
