"""Dataset representation, file ingestion, splitting, and uniform subsampling.

Datasets are immutable after construction and safe to share across threads.
Every sampling operation takes an explicit seed or ``numpy.random.Generator``;
nothing touches global RNG state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset operations."""


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Dataset:
    """A feature matrix with optional labels.

    Parameters
    ----------
    features : ndarray or scipy.sparse.csr_matrix, shape (n_rows, dim)
        One row per example. Dense float64 or CSR.
    labels : ndarray of shape (n_rows,), optional
        Real targets for regression, class indices for classification,
        ``None`` for unsupervised data.
    """

    features: object
    labels: np.ndarray | None = None

    def __post_init__(self):
        feats = self.features
        if sp.issparse(feats):
            feats = feats.tocsr()
        else:
            feats = np.asarray(feats, dtype=np.float64)
            if feats.ndim != 2:
                raise DataError(f"features must be 2-d, got shape {feats.shape}")
        if feats.shape[1] < 1:
            raise DataError("datasets need at least one feature column")
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64)
            if labels.shape != (feats.shape[0],):
                raise DataError(
                    f"labels have length {labels.shape}, expected ({feats.shape[0]},)"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.features)

    def subset(self, indices) -> "Dataset":
        """Row-indexed view (copy) of the dataset."""
        indices = np.asarray(indices)
        feats = self.features[indices]
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(feats, labels)


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/holdout partition of one dataset."""

    train: Dataset
    holdout: Dataset
    seed: int = 0


def load_dataset(path, fmt: str = "csv", label_col: str | None = None) -> Dataset:
    """Load a dataset from ``path``.

    ``fmt="csv"`` expects a header line and comma-separated numeric cells
    ('.' decimal point, UTF-8). ``fmt="sparse-svm"`` expects
    ``label idx:val idx:val ...`` lines with 1-based indices.

    ``label_col`` selects the label column by header name (csv only);
    when absent the dataset is unlabeled.
    """
    if fmt == "csv":
        return _load_csv(path, label_col)
    if fmt == "sparse-svm":
        return _load_sparse_svm(path)
    raise DataError(f"unknown dataset format {fmt!r}")


def _load_csv(path, label_col):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        label_idx = None
        if label_col is not None:
            if label_col not in header:
                raise DataError(f"{path}: no column named {label_col!r} in header")
            label_idx = header.index(label_col)

        rows, labels = [], []
        width = None
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"{path}:{lineno}: expected {width} fields, found {len(cells)}"
                )
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            if label_idx is not None:
                labels.append(values.pop(label_idx))
            rows.append(values)

    if not rows:
        raise DataError(f"{path}: no data lines")
    features = np.asarray(rows, dtype=np.float64)
    return Dataset(features, np.asarray(labels) if label_idx is not None else None)


def _load_sparse_svm(path):
    data, indices, indptr, labels = [], [], [0], []
    dim = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad pair {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}:{lineno}: indices are 1-based, got {idx}")
                indices.append(idx - 1)
                data.append(val)
                dim = max(dim, idx)
            indptr.append(len(data))
    if len(indptr) == 1:
        raise DataError(f"{path}: no data lines")
    features = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices), np.asarray(indptr)),
        shape=(len(indptr) - 1, max(dim, 1)),
    )
    return Dataset(features, np.asarray(labels))


def encode_labels(data: Dataset) -> tuple[Dataset, dict]:
    """Map distinct sorted label values to class indices 0..K-1.

    Returns the re-labeled dataset and the value -> index mapping, which
    callers should record for reproducibility.
    """
    if data.labels is None:
        raise DataError("cannot encode labels of an unlabeled dataset")
    values = np.unique(data.labels)
    if len(values) < 2:
        raise DataError("classification needs at least two distinct label values")
    mapping = {float(v): i for i, v in enumerate(values)}
    encoded = np.searchsorted(values, data.labels).astype(np.float64)
    return Dataset(data.features, encoded), mapping


def uniform_sample(data: Dataset, n: int, seed) -> Dataset:
    """Uniform sample of ``n`` distinct rows, without replacement.

    Deterministic for a fixed seed; the seed may also be a Generator.
    """
    if not 1 <= n <= data.n_rows:
        raise DataError(f"sample size {n} not in [1, {data.n_rows}]")
    rng = _as_rng(seed)
    idx = rng.choice(data.n_rows, size=n, replace=False)
    return data.subset(idx)


def split(data: Dataset, holdout_frac: float = 0.2, seed=0) -> DataSplit:
    """Partition into disjoint train/holdout sets.

    ``|holdout| = round(holdout_frac * n_rows)``; both sides must be
    non-empty.
    """
    if not 0.0 < holdout_frac < 1.0:
        raise DataError(f"holdout_frac must be in (0, 1), got {holdout_frac}")
    n_hold = int(round(holdout_frac * data.n_rows))
    if n_hold == 0 or n_hold == data.n_rows:
        raise DataError(
            f"degenerate split: {data.n_rows} rows at holdout_frac={holdout_frac}"
        )
    rng = _as_rng(seed)
    perm = rng.permutation(data.n_rows)
    seed_val = seed if isinstance(seed, int) else -1
    return DataSplit(
        train=data.subset(perm[n_hold:]),
        holdout=data.subset(perm[:n_hold]),
        seed=seed_val,
    )
