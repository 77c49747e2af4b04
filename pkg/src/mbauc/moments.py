"""Pair sampling and running first/second moments of pairwise differences.

For a positive ``x+`` and a negative ``x-`` the pairwise difference is
``z = x+ - x-``. The accumulator keeps the running means ``mu = E[z]`` and
``sigma = E[z z^T]`` over every pair absorbed so far. ``sigma`` lives as a
packed upper triangle (row-major, same order as ``np.triu_indices``) and is
expanded to a full matrix only when a solver asks for it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import LabeledDataset
from .errors import DataError

MOMENTS_FORMAT = "mbauc.moments/1"


def packed_size(d: int) -> int:
    return d * (d + 1) // 2


def pack_upper(M: np.ndarray) -> np.ndarray:
    return M[np.triu_indices(M.shape[0])]


def unpack_upper(packed: np.ndarray, d: int) -> np.ndarray:
    M = np.zeros((d, d))
    iu = np.triu_indices(d)
    M[iu] = packed
    M[(iu[1], iu[0])] = packed
    return M


def _packed_index(rows: np.ndarray, cols: np.ndarray, d: int) -> np.ndarray:
    # rows <= cols
    return rows * d - rows * (rows - 1) // 2 + (cols - rows)


@dataclass(frozen=True)
class PairSampler:
    """Zipped with-replacement pair sampler.

    Round ``t`` draws from its own generator seeded by ``(seed, t)``, so any
    round can be regenerated without replaying earlier ones.
    """

    seed: int
    B: int
    T: int = 1

    def __post_init__(self):
        if self.B < 1 or self.T < 1:
            raise DataError(f"batch size and rounds must be >= 1 (B={self.B}, T={self.T})")

    @property
    def S(self) -> int:
        return self.B * self.T

    def round_rng(self, t: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(t,))))

    def sample_round(self, t: int, n_pos: int, n_neg: int):
        """Index arrays ``(i, j)`` of length ``B``; pair ``k`` is ``(i[k], j[k])``."""
        if n_pos < 1 or n_neg < 1:
            raise DataError(f"cannot sample pairs with N+={n_pos}, N-={n_neg}")
        rng = self.round_rng(t)
        i = rng.integers(0, n_pos, size=self.B)
        j = rng.integers(0, n_neg, size=self.B)
        return i, j

    def rounds(self, n_pos: int, n_neg: int):
        for t in range(self.T):
            yield self.sample_round(t, n_pos, n_neg)


def sample_round(sampler: PairSampler, t: int, dataset: LabeledDataset) -> list[tuple[int, int]]:
    i, j = sampler.sample_round(t, dataset.n_pos, dataset.n_neg)
    return list(zip(i.tolist(), j.tolist()))


def pair_differences(dataset: LabeledDataset, i, j):
    """Difference rows ``x+_i - x-_j``; dense ndarray or CSR depending on the data."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    if i.shape != j.shape:
        raise DataError("pair index arrays differ in length")
    if i.size and (i.min() < 0 or i.max() >= dataset.n_pos or j.min() < 0 or j.max() >= dataset.n_neg):
        raise DataError(
            f"pair index out of range for N+={dataset.n_pos}, N-={dataset.n_neg}"
        )
    return dataset.pos_rows(i) - dataset.neg_rows(j)


def _batch_sums(Z, d: int):
    """Column sums and packed upper triangle of ``Z^T Z``."""
    if sp.issparse(Z):
        Z = sp.csr_matrix(Z)
        s = np.asarray(Z.sum(axis=0)).ravel()
        G = (Z.T @ Z).tocoo()
        keep = G.row <= G.col
        rows, cols, vals = G.row[keep].astype(np.int64), G.col[keep].astype(np.int64), G.data[keep]
        packed = np.zeros(packed_size(d))
        np.add.at(packed, _packed_index(rows, cols, d), vals)
        return s, packed
    Z = np.asarray(Z)
    return Z.sum(axis=0), pack_upper(Z.T @ Z)


class MomentAccumulator:
    """Running means of ``z`` and ``z z^T`` over absorbed pairs; mergeable."""

    __slots__ = ("d", "count", "mu", "sigma_packed")

    def __init__(self, d: int, count: int = 0, mu=None, sigma_packed=None):
        if d < 1:
            raise DataError("dimension must be >= 1")
        self.d = int(d)
        self.count = int(count)
        self.mu = np.zeros(d) if mu is None else np.array(mu, dtype=np.float64)
        self.sigma_packed = (
            np.zeros(packed_size(d)) if sigma_packed is None
            else np.array(sigma_packed, dtype=np.float64)
        )
        if self.mu.shape != (d,) or self.sigma_packed.shape != (packed_size(d),):
            raise DataError("moment arrays do not match dimension")
        if self.count < 0:
            raise DataError("count must be non-negative")

    @classmethod
    def empty(cls, d: int) -> "MomentAccumulator":
        return cls(d)

    @classmethod
    def from_moments(cls, mu, sigma, count: int = 1) -> "MomentAccumulator":
        mu = np.asarray(mu, dtype=np.float64).ravel()
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise DataError("sigma must be a d x d matrix matching mu")
        return cls(mu.size, count, mu, pack_upper(sigma))

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(self.d, self.count, self.mu, self.sigma_packed)

    @property
    def sigma(self) -> np.ndarray:
        return unpack_upper(self.sigma_packed, self.d)

    def _fold(self, b: int, s: np.ndarray, packed_sum: np.ndarray) -> None:
        n = self.count + b
        keep = self.count / n
        self.mu *= keep
        self.mu += s / n
        self.sigma_packed *= keep
        self.sigma_packed += packed_sum / n
        self.count = n

    def absorb(self, dataset: LabeledDataset, i, j, inplace: bool = False) -> "MomentAccumulator":
        """Fold the pairs ``(i[k], j[k])`` of ``dataset`` into the running means."""
        if dataset.d != self.d:
            raise DataError(f"dataset d={dataset.d} does not match accumulator d={self.d}")
        acc = self if inplace else self.copy()
        b = len(i)
        if b == 0:
            return acc
        Z = pair_differences(dataset, i, j)
        s, packed = _batch_sums(Z, self.d)
        acc._fold(b, s, packed)
        return acc

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.d != self.d:
            raise DataError(f"cannot merge accumulators of dimension {self.d} and {other.d}")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        n = self.count + other.count
        wa, wb = self.count / n, other.count / n
        return MomentAccumulator(
            self.d, n, wa * self.mu + wb * other.mu,
            wa * self.sigma_packed + wb * other.sigma_packed,
        )

    __add__ = merge

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma)[0])

    def to_dict(self) -> dict:
        return {
            "format": MOMENTS_FORMAT,
            "d": self.d,
            "count": self.count,
            "mu": self.mu.tolist(),
            "sigma_packed": self.sigma_packed.tolist(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "MomentAccumulator":
        if rec.get("format") != MOMENTS_FORMAT:
            raise DataError(f"unsupported moments format {rec.get('format')!r}")
        return cls(rec["d"], rec["count"], rec["mu"], rec["sigma_packed"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MomentAccumulator":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self):
        return f"MomentAccumulator(d={self.d}, count={self.count})"


def absorb_batch(acc: MomentAccumulator, pairs, dataset: LabeledDataset) -> MomentAccumulator:
    """Functional form: ``pairs`` is a sequence of ``(i, j)`` tuples."""
    pairs = list(pairs)
    if not pairs:
        return acc.copy()
    i, j = zip(*pairs)
    return acc.absorb(dataset, np.array(i), np.array(j))


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    return a.merge(b)


def accumulate(dataset: LabeledDataset, sampler: PairSampler) -> MomentAccumulator:
    """Run every round of ``sampler`` against ``dataset``."""
    dataset.require_both_classes()
    acc = MomentAccumulator.empty(dataset.d)
    for i, j in sampler.rounds(dataset.n_pos, dataset.n_neg):
        acc.absorb(dataset, i, j, inplace=True)
    return acc


def enumerate_pairs(n_pos: int, n_neg: int, batch: int = 65536):
    """All ``N+ * N-`` pairs, positive-major, in chunks of at most ``batch``."""
    total = n_pos * n_neg
    for start in range(0, total, batch):
        flat = np.arange(start, min(start + batch, total), dtype=np.int64)
        yield flat // n_neg, flat % n_neg


def accumulate_all_pairs(dataset: LabeledDataset, batch: int = 65536) -> MomentAccumulator:
    """Absorb every pair explicitly (quadratic cost; for checking the closed form)."""
    dataset.require_both_classes()
    acc = MomentAccumulator.empty(dataset.d)
    for i, j in enumerate_pairs(dataset.n_pos, dataset.n_neg, batch):
        acc.absorb(dataset, i, j, inplace=True)
    return acc


def exact_full_pair_moments(dataset: LabeledDataset) -> MomentAccumulator:
    """Moments over all pairs from per-class statistics.

    With class means ``m+``, ``m-`` and raw second moments ``C+``, ``C-``:
    ``mu = m+ - m-`` and ``sigma = C+ + C- - m+ m-^T - m- m+^T``.
    """
    dataset.require_both_classes()
    Xp, Xn = dataset.X_pos, dataset.X_neg
    m_pos = np.asarray(Xp.mean(axis=0)).ravel()
    m_neg = np.asarray(Xn.mean(axis=0)).ravel()
    C_pos = (Xp.T @ Xp).toarray() / dataset.n_pos
    C_neg = (Xn.T @ Xn).toarray() / dataset.n_neg
    cross = np.outer(m_pos, m_neg)
    sigma = C_pos + C_neg - cross - cross.T
    return MomentAccumulator(dataset.d, dataset.n_pos * dataset.n_neg, m_pos - m_neg,
                             pack_upper(sigma))
