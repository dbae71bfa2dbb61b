"""Tabular loading, per-column standardization, and reproducible splits.

Data is carried as a :class:`JointDataset`: an (n, p) float64 matrix of
joint feature-target rows with the target always stored in the last
column, so downstream stages can treat each row as one point in the
joint feature-target space.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DataError


@dataclass
class JointDataset:
    """An (n, p) matrix of joint rows; the target is the last column."""

    rows: np.ndarray
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DataError(f"expected a 2-D matrix, got {rows.ndim}-D")
        if rows.shape[0] < 1 or rows.shape[1] < 2:
            raise DataError("need at least 1 row and 2 columns (>=1 feature plus target)")
        if not np.all(np.isfinite(rows)):
            raise DataError("dataset contains NaN or infinite entries")
        if not self.column_names:
            self.column_names = tuple(f"c{i}" for i in range(rows.shape[1] - 1)) + ("y",)
        else:
            self.column_names = tuple(str(c) for c in self.column_names)
        if len(self.column_names) != rows.shape[1]:
            raise DataError(
                f"{len(self.column_names)} column names for {rows.shape[1]} columns"
            )
        self.rows = rows

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def p(self) -> int:
        return self.rows.shape[1]

    @property
    def target_index(self) -> int:
        return self.p - 1

    @property
    def features(self) -> np.ndarray:
        return self.rows[:, :-1]

    @property
    def targets(self) -> np.ndarray:
        return self.rows[:, -1]

    def take(self, indices) -> "JointDataset":
        """New dataset from a row subset (copy)."""
        return JointDataset(self.rows[np.asarray(indices, dtype=int)].copy(), self.column_names)

    def with_rows(self, rows: np.ndarray) -> "JointDataset":
        """New dataset with the same columns but different rows."""
        return JointDataset(np.asarray(rows, dtype=np.float64), self.column_names)


def load_csv(path, target_column) -> JointDataset:
    """Load a numeric CSV (header mandatory, comma-separated, '.' decimal).

    ``target_column`` is a header name or a 0-based column index; the
    target column is moved to the last position, remaining columns keep
    their order.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty (header row required)") from None
            header = [h.strip() for h in header]
            raw_rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if isinstance(target_column, int):
        if not 0 <= target_column < len(header):
            raise DataError(
                f"target column index {target_column} out of range for {len(header)} columns"
            )
        target_idx = target_column
    else:
        try:
            target_idx = header.index(str(target_column))
        except ValueError:
            raise DataError(
                f"target column {target_column!r} not found in header {header}"
            ) from None

    if not raw_rows:
        raise DataError(f"{path}: no data rows")

    matrix = np.empty((len(raw_rows), len(header)), dtype=np.float64)
    for r, row in enumerate(raw_rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"could not parse {cell.strip()!r} as a number at row {r}, "
                    f"column {header[c]!r}"
                ) from None
            if not np.isfinite(value):
                raise DataError(
                    f"non-finite value {cell.strip()!r} at row {r}, column {header[c]!r}"
                )
            matrix[r - 1, c] = value

    order = [i for i in range(len(header)) if i != target_idx] + [target_idx]
    return JointDataset(matrix[:, order], tuple(header[i] for i in order))


def write_csv(data: JointDataset, path) -> None:
    """Write a dataset using shortest round-tripping float representations."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(data.column_names) + "\n")
        for row in data.rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column z-scoring with the population (ddof=0) standard deviation.

    Constant columns are flagged and passed through centered (their scale
    is replaced by 1), so the transform is always invertible.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise DataError("standardizer needs a 2-D matrix with at least 2 rows")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.constant_mask_ = std == 0.0
        self.scale_ = np.where(self.constant_mask_, 1.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X * self.scale_ + self.mean_


def standardize(data: JointDataset) -> tuple[JointDataset, Standardizer]:
    """Z-score every column (target included); see :class:`Standardizer`."""
    scaler = Standardizer().fit(data.rows)
    return data.with_rows(scaler.transform(data.rows)), scaler


@dataclass(frozen=True)
class SplitPlan:
    """One train/test partition of row indices."""

    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    seed: int
    train_fraction: float

    def to_dict(self) -> dict:
        return {
            "train_indices": list(self.train_indices),
            "test_indices": list(self.test_indices),
            "seed": self.seed,
            "train_fraction": self.train_fraction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def split_seed(seed: int, index: int) -> int:
    """64-bit hash mix of (seed, split index): independent per-split streams."""
    ss = np.random.SeedSequence((int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def make_splits(n: int, n_splits: int, train_fraction: float, seed: int) -> list[SplitPlan]:
    """Deterministic random train/test splits; split i uses split_seed(seed, i)."""
    if n_splits < 1:
        raise DataError("n_splits must be >= 1")
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise DataError(
            f"split of {n} rows at fraction {train_fraction} leaves an empty side"
        )
    plans = []
    for i in range(n_splits):
        rng = np.random.default_rng(split_seed(seed, i))
        perm = rng.permutation(n)
        train = tuple(sorted(int(j) for j in perm[:n_train]))
        test = tuple(sorted(int(j) for j in perm[n_train:]))
        plans.append(SplitPlan(train, test, seed, train_fraction))
    return plans
