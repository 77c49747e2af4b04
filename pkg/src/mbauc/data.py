"""Sparse labeled datasets: LIBSVM I/O, stratified splits, L2 normalization."""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, ParseError

DEFAULT_MAX_D = 20_000
# Row gathers switch to dense arrays above this fill ratio.
DENSE_FILL = 0.3


@dataclass(frozen=True, eq=False)
class SparseExample:
    indices: np.ndarray
    values: np.ndarray
    label: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise DataError("indices and values must be 1-d arrays of equal length")
        if idx.size and (idx[0] < 0 or np.any(np.diff(idx) <= 0)):
            raise DataError("indices must be non-negative and strictly ascending")
        if self.label not in (1, -1):
            raise DataError(f"label must be +1 or -1, got {self.label!r}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    def __eq__(self, other):
        if not isinstance(other, SparseExample):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def to_dense(self, d: int) -> np.ndarray:
        x = np.zeros(d)
        x[self.indices] = self.values
        return x


def _rows_to_csr(examples: Sequence[SparseExample], d: int) -> sp.csr_matrix:
    indptr = np.zeros(len(examples) + 1, dtype=np.int64)
    for k, ex in enumerate(examples):
        indptr[k + 1] = indptr[k] + ex.indices.size
    if examples:
        indices = np.concatenate([ex.indices for ex in examples])
        data = np.concatenate([ex.values for ex in examples])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(examples), d))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Positive and negative examples stored as one CSR matrix per class.

    The matrices are treated as immutable; every transform returns a new
    dataset.
    """

    X_pos: sp.csr_matrix
    X_neg: sp.csr_matrix
    d: int
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X_pos = sp.csr_matrix(self.X_pos, dtype=np.float64)
        X_neg = sp.csr_matrix(self.X_neg, dtype=np.float64)
        if X_pos.shape[1] != self.d or X_neg.shape[1] != self.d:
            raise DataError(
                f"matrix widths {X_pos.shape[1]}/{X_neg.shape[1]} do not match d={self.d}"
            )
        if self.d < 1:
            raise DataError("dimension d must be at least 1")
        X_pos.sort_indices()
        X_neg.sort_indices()
        object.__setattr__(self, "X_pos", X_pos)
        object.__setattr__(self, "X_neg", X_neg)

    @classmethod
    def from_examples(cls, examples: Iterable[SparseExample], d: int | None = None, name: str = ""):
        pos, neg = [], []
        max_idx = -1
        for ex in examples:
            (pos if ex.label == 1 else neg).append(ex)
            if ex.indices.size:
                max_idx = max(max_idx, int(ex.indices[-1]))
        if d is None:
            d = max(max_idx + 1, 1)
        elif max_idx >= d:
            raise DataError(f"feature index {max_idx} out of range for d={d}")
        return cls(_rows_to_csr(pos, d), _rows_to_csr(neg, d), d, name)

    @classmethod
    def from_dense(cls, X_pos, X_neg, name: str = ""):
        X_pos = np.atleast_2d(np.asarray(X_pos, dtype=np.float64))
        X_neg = np.atleast_2d(np.asarray(X_neg, dtype=np.float64))
        return cls(sp.csr_matrix(X_pos), sp.csr_matrix(X_neg), X_pos.shape[1], name)

    @property
    def n_pos(self) -> int:
        return self.X_pos.shape[0]

    @property
    def n_neg(self) -> int:
        return self.X_neg.shape[0]

    def __len__(self):
        return self.n_pos + self.n_neg

    @staticmethod
    def _examples(X, label):
        return tuple(
            SparseExample(X.indices[X.indptr[k]:X.indptr[k + 1]],
                          X.data[X.indptr[k]:X.indptr[k + 1]], label)
            for k in range(X.shape[0])
        )

    @property
    def positives(self) -> tuple[SparseExample, ...]:
        return self._examples(self.X_pos, 1)

    @property
    def negatives(self) -> tuple[SparseExample, ...]:
        return self._examples(self.X_neg, -1)

    @cached_property
    def is_dense(self) -> bool:
        total = max(len(self) * self.d, 1)
        return (self.X_pos.nnz + self.X_neg.nnz) / total > DENSE_FILL

    @cached_property
    def _dense_pos(self):
        return self.X_pos.toarray()

    @cached_property
    def _dense_neg(self):
        return self.X_neg.toarray()

    def pos_rows(self, idx):
        """Gather positive rows; dense ndarray for dense data, CSR otherwise."""
        return self._dense_pos[idx] if self.is_dense else self.X_pos[idx]

    def neg_rows(self, idx):
        return self._dense_neg[idx] if self.is_dense else self.X_neg[idx]

    def require_both_classes(self):
        if self.n_pos < 1 or self.n_neg < 1:
            raise DataError(
                f"dataset {self.name!r} needs both classes (N+={self.n_pos}, N-={self.n_neg})"
            )

    def subset(self, pos_idx, neg_idx, name: str | None = None) -> "LabeledDataset":
        return LabeledDataset(
            self.X_pos[np.asarray(pos_idx, dtype=np.int64)],
            self.X_neg[np.asarray(neg_idx, dtype=np.int64)],
            self.d,
            self.name if name is None else name,
        )

    def with_dimension(self, d: int) -> "LabeledDataset":
        """Widen the feature space, e.g. to match a model trained on more columns."""
        if d < self.d:
            raise DataError(f"cannot shrink dimension from {self.d} to {d}")
        if d == self.d:
            return self
        X_pos = sp.csr_matrix((self.X_pos.data, self.X_pos.indices, self.X_pos.indptr),
                              shape=(self.n_pos, d))
        X_neg = sp.csr_matrix((self.X_neg.data, self.X_neg.indices, self.X_neg.indptr),
                              shape=(self.n_neg, d))
        return LabeledDataset(X_pos, X_neg, d, self.name)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return self.d == other.d and _csr_equal(self.X_pos, other.X_pos) and _csr_equal(
            self.X_neg, other.X_neg
        )


def _csr_equal(a: sp.csr_matrix, b: sp.csr_matrix) -> bool:
    return (
        a.shape == b.shape
        and np.array_equal(a.indptr, b.indptr)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.data, b.data)
    )


# ---------------------------------------------------------------------------
# LIBSVM text format

_LABELS = {1.0: 1, -1.0: -1, 0.0: -1}


def _parse_line(line: str, lineno: int) -> SparseExample:
    tokens = line.split("#", 1)[0].split()
    try:
        raw = float(tokens[0])
    except ValueError:
        raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
    if raw not in _LABELS:
        raise ParseError(f"label {tokens[0]!r} is not one of +1, 1, -1, 0", lineno)
    n = len(tokens) - 1
    indices = np.empty(n, dtype=np.int64)
    values = np.empty(n)
    prev = 0
    for k, tok in enumerate(tokens[1:]):
        idx_s, sep, val_s = tok.partition(":")
        if not sep:
            raise ParseError(f"malformed token {tok!r}", lineno)
        try:
            idx = int(idx_s)
            val = float(val_s)
        except ValueError:
            raise ParseError(f"malformed token {tok!r}", lineno) from None
        if not math.isfinite(val):
            raise ParseError(f"non-finite value in {tok!r}", lineno)
        if idx < 1:
            raise ParseError(f"feature index {idx} must be >= 1", lineno)
        if idx <= prev:
            raise ParseError(f"feature indices not strictly ascending at {tok!r}", lineno)
        prev = idx
        indices[k] = idx - 1
        values[k] = val
    return SparseExample(indices, values, _LABELS[raw])


def parse_libsvm(
    stream: Iterable[str],
    d: int | None = None,
    name: str = "",
    max_d: int = DEFAULT_MAX_D,
) -> LabeledDataset:
    """Parse LIBSVM text (1-based indices) from an iterable of lines.

    Labels 0 and -1 both map to the negative class. ``d`` overrides the
    inferred dimension so that train and test files can share one feature
    space.
    """
    examples = []
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode()
        if not line.split("#", 1)[0].strip():
            continue
        examples.append(_parse_line(line, lineno))
    if not examples:
        raise ParseError("no examples found (empty input)")
    max_idx = max((int(ex.indices[-1]) for ex in examples if ex.indices.size), default=-1)
    if d is not None and max_idx >= d:
        raise ParseError(f"feature index {max_idx + 1} exceeds dimension override d={d}")
    dim = d if d is not None else max(max_idx + 1, 1)
    if dim > max_d:
        raise ConfigError(
            f"dimension {dim} exceeds max_d={max_d}; the dense second-moment matrix "
            f"would need {dim * dim * 8 / 1e9:.1f} GB"
        )
    return LabeledDataset.from_examples(examples, dim, name)


def _open_text(path: Path) -> TextIO:
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def load_libsvm(path, d: int | None = None, max_d: int = DEFAULT_MAX_D) -> LabeledDataset:
    path = Path(path)
    try:
        fh = _open_text(path)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        return parse_libsvm(fh, d=d, name=path.name.split(".")[0], max_d=max_d)


def _format_rows(X: sp.csr_matrix, label: str):
    for k in range(X.shape[0]):
        lo, hi = X.indptr[k], X.indptr[k + 1]
        feats = " ".join(f"{i + 1}:{v!r}" for i, v in zip(X.indices[lo:hi].tolist(),
                                                         X.data[lo:hi].tolist()))
        yield f"{label} {feats}".rstrip() + "\n"


def serialize_libsvm(dataset: LabeledDataset, stream: TextIO) -> None:
    """Write positives then negatives; ``repr`` floats round-trip exactly."""
    stream.writelines(_format_rows(dataset.X_pos, "+1"))
    stream.writelines(_format_rows(dataset.X_neg, "-1"))


def dumps_libsvm(dataset: LabeledDataset) -> str:
    buf = io.StringIO()
    serialize_libsvm(dataset, buf)
    return buf.getvalue()


def save_libsvm(dataset: LabeledDataset, path) -> None:
    path = Path(path)
    opener = gzip.open(path, "wt", encoding="utf-8") if path.suffix == ".gz" else open(
        path, "w", encoding="utf-8")
    with opener as fh:
        serialize_libsvm(dataset, fh)


# ---------------------------------------------------------------------------
# splitting and normalization

@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.5
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


def _class_test_count(n: int, frac: float, cls: str) -> int:
    n_test = int(math.floor(n * frac + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise DataError(
            f"{cls} class with {n} examples cannot be split at test_fraction={frac}"
        )
    return n_test


def stratified_split(dataset: LabeledDataset, spec: SplitSpec):
    """Return ``(train, test)``; within-class order follows the source dataset."""
    dataset.require_both_classes()
    rng = np.random.default_rng(spec.seed)
    if not spec.stratified:
        # Shuffle the pooled examples, then re-partition by class.
        n = len(dataset)
        n_test = _class_test_count(n, spec.test_fraction, "pooled")
        test_mask = np.zeros(n, dtype=bool)
        test_mask[rng.permutation(n)[:n_test]] = True
        pos_test, neg_test = test_mask[: dataset.n_pos], test_mask[dataset.n_pos:]
        if pos_test.all() or not pos_test.any() or neg_test.all() or not neg_test.any():
            raise DataError("unstratified split left a class empty in train or test")
    else:
        pos_test = np.zeros(dataset.n_pos, dtype=bool)
        neg_test = np.zeros(dataset.n_neg, dtype=bool)
        k_pos = _class_test_count(dataset.n_pos, spec.test_fraction, "positive")
        k_neg = _class_test_count(dataset.n_neg, spec.test_fraction, "negative")
        pos_test[rng.permutation(dataset.n_pos)[:k_pos]] = True
        neg_test[rng.permutation(dataset.n_neg)[:k_neg]] = True
    train = dataset.subset(np.flatnonzero(~pos_test), np.flatnonzero(~neg_test),
                           name=f"{dataset.name}-train")
    test = dataset.subset(np.flatnonzero(pos_test), np.flatnonzero(neg_test),
                          name=f"{dataset.name}-test")
    return train, test


def _normalize_rows(X: sp.csr_matrix) -> sp.csr_matrix:
    X = X.copy()
    sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    norms = np.sqrt(sq)
    scale = np.ones_like(norms)
    nz = norms > 0
    scale[nz] = 1.0 / norms[nz]
    X.data *= np.repeat(scale, np.diff(X.indptr))
    return X


def normalize_l2(dataset: LabeledDataset) -> LabeledDataset:
    """Scale every nonzero example to unit Euclidean norm."""
    return LabeledDataset(_normalize_rows(dataset.X_pos), _normalize_rows(dataset.X_neg),
                          dataset.d, dataset.name)


def max_sq_norm(dataset: LabeledDataset) -> float:
    """Largest squared L2 norm over all examples (the data radius bound)."""
    out = 0.0
    for X in (dataset.X_pos, dataset.X_neg):
        if X.shape[0]:
            out = max(out, float(np.asarray(X.multiply(X).sum(axis=1)).max()))
    return out
