"""Alternating least squares matrix factorization baseline.

Responses pool across years into one respondent x question matrix; the
factorization minimizes squared error on observed cells plus a ridge penalty
on both factor matrices. Each half-sweep solves exact per-row (or
per-column) ridge systems, so the penalized objective never increases. Rows
or columns with no observations keep zero factors and predict 0. The
factorization has no input for questions outside the training matrix, which
is exactly why it cannot address never-asked questions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ConfigError
from .seeding import rng_for
from .validation import check_positive


@dataclass
class ObservedMatrix:
    """COO-style view of the observed cells of a partially known matrix."""

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    shape: tuple

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if not (self.rows.shape == self.cols.shape == self.values.shape):
            raise ConfigError("rows, cols, and values must align")
        if self.rows.size == 0:
            raise ConfigError("observed matrix has no cells")
        n, p = self.shape
        if self.rows.min() < 0 or self.rows.max() >= n:
            raise ConfigError("row index out of range")
        if self.cols.min() < 0 or self.cols.max() >= p:
            raise ConfigError("column index out of range")

    @classmethod
    def from_dense(cls, dense):
        """Build from a dense array where NaN marks unobserved cells."""
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(~np.isnan(dense))
        return cls(rows, cols, dense[rows, cols], dense.shape)

    @classmethod
    def from_dataset(cls, ds, record_mask=None):
        """Pool a SurveyDataset over years into respondent x question cells.

        When the same (respondent, question) pair is observed in several
        years the pooled cell takes the mean response, which reduces to the
        single observed value for year-scoped respondent keys.
        """
        if record_mask is None:
            record_mask = np.ones(ds.n_records, dtype=bool)
        record_mask = np.asarray(record_mask, dtype=bool)
        rows = ds.individual_ids[record_mask]
        cols = ds.question_ids[record_mask]
        vals = ds.labels[record_mask].astype(np.float64)
        combo = rows * ds.n_questions + cols
        uniq, inverse = np.unique(combo, return_inverse=True)
        sums = np.bincount(inverse, weights=vals, minlength=uniq.size)
        counts = np.bincount(inverse, minlength=uniq.size)
        return cls(
            uniq // ds.n_questions,
            uniq % ds.n_questions,
            sums / counts,
            (ds.n_individuals, ds.n_questions),
        )


@dataclass
class MfFactors:
    """Fitted factor matrices plus the fitting trace."""

    row_factors: np.ndarray  # (n_rows, rank)
    col_factors: np.ndarray  # (rank, n_cols)
    ridge: float
    iterations: int
    objective_history: list = field(default_factory=list)

    @property
    def rank(self):
        return int(self.row_factors.shape[1])


def regularized_objective(matrix, row_factors, col_factors, ridge):
    """Squared error on observed cells plus ridge on both factor norms."""
    fitted = np.einsum(
        "ij,ji->i", row_factors[matrix.rows], col_factors[:, matrix.cols]
    )
    errors = fitted - matrix.values
    return float(
        np.sum(errors**2)
        + ridge * (np.sum(row_factors**2) + np.sum(col_factors**2))
    )


def _grouped(indices, companions, values):
    """Sort cells by one axis; yield (index, companion_ids, cell_values)."""
    order = np.argsort(indices, kind="mergesort")
    idx_sorted = indices[order]
    boundaries = np.flatnonzero(
        np.concatenate(([True], idx_sorted[1:] != idx_sorted[:-1]))
    )
    ends = np.append(boundaries[1:], len(order))
    for start, end in zip(boundaries, ends):
        rows = order[start:end]
        yield int(idx_sorted[start]), companions[rows], values[rows]


def als_fit(matrix, rank=50, ridge=10.0, iterations=15, seed=0, track_objective=True):
    """Fit factors by alternating exact ridge solves.

    Both factor matrices start uniform(0, 0.1) from the seed. Each sweep
    first re-solves every row factor against the current column factors,
    then every column factor against the new row factors; the penalized
    objective is recorded after each half-sweep when tracking is on.
    """
    check_positive(rank, "rank")
    check_positive(iterations, "iterations")
    if ridge < 0:
        raise ConfigError("ridge must be non-negative")
    n, p = matrix.shape
    rng = rng_for(seed, "als-init")
    row_factors = rng.uniform(0.0, 0.1, size=(n, rank))
    col_factors = rng.uniform(0.0, 0.1, size=(rank, p))
    row_factors[np.setdiff1d(np.arange(n), matrix.rows)] = 0.0
    col_factors[:, np.setdiff1d(np.arange(p), matrix.cols)] = 0.0

    row_groups = list(_grouped(matrix.rows, matrix.cols, matrix.values))
    col_groups = list(_grouped(matrix.cols, matrix.rows, matrix.values))
    eye = ridge * np.eye(rank)
    history = []
    for _ in range(iterations):
        for i, cols, vals in row_groups:
            q = col_factors[:, cols]
            row_factors[i] = np.linalg.solve(q @ q.T + eye, q @ vals)
        if track_objective:
            history.append(
                regularized_objective(matrix, row_factors, col_factors, ridge)
            )
        for j, rows, vals in col_groups:
            r = row_factors[rows]
            col_factors[:, j] = np.linalg.solve(r.T @ r + eye, r.T @ vals)
        if track_objective:
            history.append(
                regularized_objective(matrix, row_factors, col_factors, ridge)
            )
    return MfFactors(row_factors, col_factors, ridge, iterations, history)


def mf_predict(factors, rows, cols):
    """Dot-product scores for (row, column) pairs; raw, not clamped."""
    rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
    cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
    n, rank = factors.row_factors.shape
    p = factors.col_factors.shape[1]
    if rows.min() < 0 or rows.max() >= n:
        raise ConfigError(f"row index out of range [0, {n})")
    if cols.min() < 0 or cols.max() >= p:
        raise ConfigError(f"column index out of range [0, {p})")
    return np.einsum(
        "ij,ji->i", factors.row_factors[rows], factors.col_factors[:, cols]
    )


class AlsCompleter(BaseEstimator):
    """Estimator-style wrapper: fit an ObservedMatrix, score cell pairs."""

    def __init__(self, rank=50, ridge=10.0, iterations=15, seed=0):
        self.rank = rank
        self.ridge = ridge
        self.iterations = iterations
        self.seed = seed

    def fit(self, matrix, y=None):
        if isinstance(matrix, np.ndarray):
            matrix = ObservedMatrix.from_dense(matrix)
        self.factors_ = als_fit(
            matrix,
            rank=self.rank,
            ridge=self.ridge,
            iterations=self.iterations,
            seed=self.seed,
        )
        return self

    def predict(self, rows, cols=None):
        if not hasattr(self, "factors_"):
            raise ConfigError("completer is not fitted yet")
        if cols is None:
            pairs = np.asarray(rows)
            rows, cols = pairs[:, 0], pairs[:, 1]
        return mf_predict(self.factors_, rows, cols)
