"""Observation storage, CSV ingestion and deterministic K-fold splitting.

All estimators in this package consume an :class:`ObservationSet` (covariates
``X``, binary treatment ``A``, outcome ``Y``) and a seeded
:class:`FoldAssignment` for cross-fitting.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field

import numpy as np
import pandas as pd


class SchemaError(ValueError):
    """A required column is missing or the schema is malformed."""


class ValidationError(ValueError):
    """A cell violates the domain of its column (e.g. non-binary treatment)."""


class ParseError(ValueError):
    """A cell could not be parsed as a finite number."""


@dataclass(frozen=True)
class ObservationSet:
    """Immutable (X, A, Y) triple for n units.

    X is an n x p float matrix, A a length-n {0,1} vector, Y a length-n
    float vector.
    """

    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    covariate_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        A = np.asarray(self.A)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-d matrix")
        n = X.shape[0]
        if A.shape != (n,) or Y.shape != (n,):
            raise ValidationError("X, A, Y must share the same number of rows")
        if n < 2:
            raise ValidationError("need at least 2 observations")
        if not np.all(np.isin(A, (0, 1))):
            raise ValidationError("treatment vector A must contain only 0/1")
        if not np.all(np.isfinite(X)):
            raise ValidationError("X contains non-finite entries")
        if not np.all(np.isfinite(Y)):
            raise ValidationError("Y contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "A", A.astype(np.int64))
        object.__setattr__(self, "Y", Y)
        X.setflags(write=False)
        self.A.setflags(write=False)
        Y.setflags(write=False)
        names = self.covariate_names or tuple(f"x{j+1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValidationError("covariate_names length must equal p")
        object.__setattr__(self, "covariate_names", tuple(names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "ObservationSet":
        return ObservationSet(self.X[idx], self.A[idx], self.Y[idx],
                              self.covariate_names)


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of {0..n-1} into K folds of nearly equal size."""

    fold_of: np.ndarray
    K: int
    seed: int

    def test_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == k)

    def train_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != k)


def make_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Seeded permute-then-block K-fold split; fold sizes differ by at most 1.

    The first (n mod K) folds receive the extra unit.
    """
    if K < 2 or K > n:
        raise ValueError(f"fold count K={K} must satisfy 2 <= K <= n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    base, extra = divmod(n, K)
    fold_of = np.empty(n, dtype=np.int64)
    start = 0
    for k in range(K):
        size = base + (1 if k < extra else 0)
        fold_of[perm[start:start + size]] = k
        start += size
    fold_of.setflags(write=False)
    return FoldAssignment(fold_of=fold_of, K=K, seed=seed)


def _resolve_x_cols(columns: list[str], x_cols: str | list[str],
                    y_col: str, a_col: str) -> list[str]:
    """Expand an ``x_cols`` spec: explicit list, comma list, or glob like 'x*'."""
    if isinstance(x_cols, str):
        if any(ch in x_cols for ch in "*?["):
            matched = [c for c in columns
                       if fnmatch.fnmatchcase(c, x_cols) and c not in (y_col, a_col)]
            if not matched:
                raise SchemaError(f"covariate pattern {x_cols!r} matches no column")
            return matched
        x_cols = [c.strip() for c in x_cols.split(",") if c.strip()]
    return list(x_cols)


def load_observations(path, schema: tuple[str, str, str | list[str]]) -> ObservationSet:
    """Load a CSV into an ObservationSet.

    ``schema`` is (y_col, a_col, x_cols) where x_cols is a list of names, a
    comma-separated string, or a glob pattern such as ``"x*"``. Covariate
    column order is preserved as given (glob: file order).
    """
    y_col, a_col, x_cols = schema
    df = pd.read_csv(path)
    columns = list(df.columns)
    x_names = _resolve_x_cols(columns, x_cols, y_col, a_col)
    for col in [y_col, a_col, *x_names]:
        if col not in columns:
            raise SchemaError(f"column {col!r} not found in {path}")
    if not x_names:
        raise SchemaError("schema must name at least one covariate column")

    def to_numeric(col: str) -> np.ndarray:
        vals = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise ParseError(
                f"non-numeric or missing value at row {row}, column {col!r}")
        return vals

    y = to_numeric(y_col)
    a_raw = to_numeric(a_col)
    if not np.all(np.isin(a_raw, (0.0, 1.0))):
        row = int(np.flatnonzero(~np.isin(a_raw, (0.0, 1.0)))[0])
        raise ValidationError(
            f"treatment column {a_col!r} has non-{{0,1}} value at row {row}")
    X = np.column_stack([to_numeric(c) for c in x_names])
    return ObservationSet(X=X, A=a_raw.astype(np.int64), Y=y,
                          covariate_names=tuple(x_names))


def write_observations(data: ObservationSet, path,
                       schema: tuple[str, str, list[str]] | None = None) -> None:
    """Write an ObservationSet to CSV; inverse of :func:`load_observations`.

    Floats are written with 17 significant digits for a bit-stable round trip.
    """
    if schema is None:
        y_col, a_col, x_names = "y", "a", list(data.covariate_names)
    else:
        y_col, a_col, x_names = schema
    df = pd.DataFrame({y_col: data.Y, a_col: data.A})
    for j, name in enumerate(x_names):
        df[name] = data.X[:, j]
    df.to_csv(path, index=False, float_format="%.17g")
