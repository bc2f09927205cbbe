"""Planted missingness mechanisms and a synthetic survey generator.

The three simulators mask observed cells of a respondent-row x variable
matrix under distinct regimes: uniformly at random; by a logistic model of
each variable's existing missingness fitted on low-missingness observed
columns; and by a logistic model fitted on one-hot demographics only. The
per-variable mask quotas come from a largest-remainder allocation so each
variable's masked share matches the rate while the total stays within one
cell of rate x observed.

The generator plants a low-rank interaction structure (respondent, question,
and period factors) and emits a dataset plus a matching "semantic" embedding
file, giving the whole pipeline a desk-scale ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import ResponseRecord, SurveyDataset
from .embeddings import EmbeddingMatrix
from .errors import (
    ConfigError,
    CoverageError,
    MechanismInfeasibleError,
    ParseError,
)
from .seeding import rng_for
from .validation import check_fraction, check_positive

MECHANISMS = ("mcar", "mar", "mnar")


@dataclass
class LogisticModel:
    """Binary logistic fit: intercept + coefficients over feature columns."""

    intercept: float
    coefficients: np.ndarray
    l2: float
    converged: bool
    n_iterations: int
    max_change: float

    def predict_proba(self, features):
        features = np.asarray(features, dtype=np.float64)
        z = self.intercept + features @ self.coefficients
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def penalized_log_likelihood(intercept, coefficients, features, labels, l2):
    """Objective maximized by fit_logistic; the intercept is unpenalized."""
    z = intercept + features @ coefficients
    # log sigma(z) for y=1 and log(1 - sigma(z)) for y=0, stably:
    loglik = float(np.sum(labels * z - np.logaddexp(0.0, z)))
    return loglik - 0.5 * l2 * float(np.sum(coefficients**2))


def fit_logistic(features, labels, l2=1e-4, max_iter=100, tol=1e-8):
    """Newton (iteratively reweighted least squares) logistic regression.

    Maximizes the log-likelihood minus an L2 penalty on the non-intercept
    coefficients, which keeps separated data finite. Convergence means the
    largest absolute coefficient change fell below ``tol``; running out of
    iterations is reported on the model, not raised.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    labels = np.asarray(labels, dtype=np.float64)
    n, k = features.shape
    if labels.shape != (n,):
        raise ConfigError("labels must align with feature rows")
    design = np.column_stack([np.ones(n), features])
    penalty = np.diag([0.0] + [l2] * k)
    w = np.zeros(k + 1)
    converged = False
    change = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        z = design @ w
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        gradient = design.T @ (labels - p) - penalty @ w
        r = np.maximum(p * (1.0 - p), 1e-12)
        hessian = (design * r[:, None]).T @ design + penalty
        step = np.linalg.solve(hessian, gradient)
        w = w + step
        change = float(np.max(np.abs(step)))
        if change < tol:
            converged = True
            break
    return LogisticModel(
        intercept=float(w[0]),
        coefficients=w[1:].copy(),
        l2=l2,
        converged=converged,
        n_iterations=iteration,
        max_change=change,
    )


@dataclass
class MissingMask:
    """Cells selected for removal, with enough context to export them."""

    mechanism: str
    rate: float
    seed: int
    row_indices: np.ndarray
    col_indices: np.ndarray
    row_keys: list  # (respondent_key, year) per matrix row
    col_names: list

    @property
    def size(self):
        return int(self.row_indices.shape[0])

    def cells(self):
        return set(zip(self.row_indices.tolist(), self.col_indices.tolist()))

    def to_csv(self, path):
        order = np.lexsort((self.col_indices, self.row_indices))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["yearid", "variable", "year"])
            for i in order:
                key, year = self.row_keys[self.row_indices[i]]
                writer.writerow([key, self.col_names[self.col_indices[i]], year])

    @classmethod
    def from_csv(cls, path, row_keys, col_names, mechanism="", rate=0.0, seed=0):
        row_lookup = {tuple(k): i for i, k in enumerate(row_keys)}
        col_lookup = {name: j for j, name in enumerate(col_names)}
        rows, cols = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for line_no, row in enumerate(reader, start=2):
                try:
                    pair = (int(row["yearid"]), int(row["year"]))
                except (KeyError, TypeError, ValueError):
                    raise ParseError("bad mask row", line_no) from None
                if pair not in row_lookup or row["variable"] not in col_lookup:
                    raise ParseError(
                        f"mask cell {pair} / {row.get('variable')!r} not in dataset",
                        line_no,
                    )
                rows.append(row_lookup[pair])
                cols.append(col_lookup[row["variable"]])
        return cls(
            mechanism,
            rate,
            seed,
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            [tuple(k) for k in row_keys],
            list(col_names),
        )


def build_response_matrix(ds):
    """Dense respondent-row x variable matrix with NaN for unobserved.

    A matrix row is one interview: a (respondent_key, year) pair. Returns
    (matrix, row_keys, col_names).
    """
    pairs = sorted(
        {
            (int(k), int(y))
            for k, y in zip(ds.respondent_keys.tolist(), ds.record_years.tolist())
        }
    )
    row_of = {pair: i for i, pair in enumerate(pairs)}
    matrix = np.full((len(pairs), ds.n_questions), np.nan)
    for i in range(ds.n_records):
        r = row_of[(int(ds.respondent_keys[i]), int(ds.record_years[i]))]
        matrix[r, ds.question_ids[i]] = ds.labels[i]
    return matrix, pairs, list(ds.variables)


def _quotas(observed_counts, rate):
    """Largest-remainder allocation of round(rate * total) across columns."""
    observed_counts = np.asarray(observed_counts, dtype=np.int64)
    total_target = int(round(rate * int(observed_counts.sum())))
    raw = rate * observed_counts
    quotas = np.floor(raw).astype(np.int64)
    quotas = np.minimum(quotas, observed_counts)
    shortfall = total_target - int(quotas.sum())
    if shortfall > 0:
        remainders = np.where(quotas < observed_counts, raw - np.floor(raw), -1.0)
        # stable tie-break: larger remainder first, then lower column index
        order = np.lexsort((np.arange(len(quotas)), -remainders))
        for j in order:
            if shortfall == 0:
                break
            if quotas[j] < observed_counts[j]:
                quotas[j] += 1
                shortfall -= 1
    return quotas


def _mask_from_cells(mechanism, rate, seed, rows, cols, row_keys, col_names):
    return MissingMask(
        mechanism,
        rate,
        seed,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        [tuple(k) for k in row_keys],
        list(col_names),
    )


def simulate_mcar(matrix, rate=0.1, seed=0, row_keys=None, col_names=None):
    """Mask a uniform random round(rate * observed) subset of cells."""
    matrix = np.asarray(matrix, dtype=np.float64)
    check_fraction(rate, "rate", inclusive_low=False)
    obs_rows, obs_cols = np.nonzero(~np.isnan(matrix))
    n_obs = obs_rows.shape[0]
    if n_obs == 0:
        raise ConfigError("matrix has no observed cells")
    rng = rng_for(seed, "mcar")
    take = int(round(rate * n_obs))
    picked = rng.permutation(n_obs)[:take]
    return _mask_from_cells(
        "mcar",
        rate,
        seed,
        obs_rows[picked],
        obs_cols[picked],
        row_keys or [("", i) for i in range(matrix.shape[0])],
        col_names or [str(j) for j in range(matrix.shape[1])],
    )


def _top_rate_cells(scores_by_col, observed_by_col, quotas, rng):
    rows_out, cols_out = [], []
    for j, quota in enumerate(quotas):
        if quota == 0:
            continue
        rows_j = observed_by_col[j]
        scores = scores_by_col[j]
        shuffle = rng.permutation(rows_j.shape[0])
        # stable sort after a seeded shuffle: ties fall in shuffled order
        order = shuffle[np.argsort(-scores[shuffle], kind="mergesort")]
        keep = rows_j[order[:quota]]
        rows_out.extend(keep.tolist())
        cols_out.extend([j] * int(quota))
    return rows_out, cols_out


def simulate_mar(
    matrix, rate=0.1, seed=0, predictor_max_missing=0.1, row_keys=None, col_names=None
):
    """Mask cells most predictable from other observed variables.

    Per target variable, a logistic model of its existing missingness is fit
    on the columns with under ``predictor_max_missing`` missingness
    (mean-imputed), and the top-rate fraction of its observed cells by
    fitted probability is masked. Requires at least one eligible predictor.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    check_fraction(rate, "rate", inclusive_low=False)
    n, p = matrix.shape
    missing = np.isnan(matrix)
    miss_frac = missing.mean(axis=0)
    imputed = matrix.copy()
    col_means = np.nanmean(np.where(missing, np.nan, matrix), axis=0)
    col_means = np.where(np.isnan(col_means), 0.0, col_means)
    for j in range(p):
        imputed[missing[:, j], j] = col_means[j]

    rng = rng_for(seed, "mar")
    observed_by_col = [np.flatnonzero(~missing[:, j]) for j in range(p)]
    quotas = _quotas([len(o) for o in observed_by_col], rate)
    scores_by_col = []
    for j in range(p):
        predictors = [
            c for c in range(p) if c != j and miss_frac[c] < predictor_max_missing
        ]
        if not predictors:
            raise MechanismInfeasibleError(
                f"variable {j}: no predictor column has missingness below "
                f"{predictor_max_missing}"
            )
        model = fit_logistic(imputed[:, predictors], missing[:, j].astype(float))
        scores_by_col.append(model.predict_proba(imputed[:, predictors]))
    rows_out, cols_out = _top_rate_cells(
        [s[observed_by_col[j]] for j, s in enumerate(scores_by_col)],
        observed_by_col,
        quotas,
        rng,
    )
    return _mask_from_cells(
        "mar",
        rate,
        seed,
        rows_out,
        cols_out,
        row_keys or [("", i) for i in range(n)],
        col_names or [str(j) for j in range(p)],
    )


def one_hot_demographics(demographics, n_rows):
    """Expand {column -> category per row} into a 0/1 design matrix."""
    columns = []
    names = []
    for col in sorted(demographics):
        values = list(demographics[col])
        if len(values) != n_rows:
            raise CoverageError(
                f"demographic column {col!r} covers {len(values)} of {n_rows} rows"
            )
        if any(v is None or (isinstance(v, float) and np.isnan(v)) for v in values):
            raise CoverageError(f"demographic column {col!r} has missing entries")
        for level in sorted({str(v) for v in values}):
            columns.append([1.0 if str(v) == level else 0.0 for v in values])
            names.append(f"{col}={level}")
    if not columns:
        raise CoverageError("no demographic columns supplied")
    return np.asarray(columns, dtype=np.float64).T, names


def simulate_mnar(matrix, demographics, rate=0.1, seed=0, row_keys=None, col_names=None):
    """Mask cells most predictable from demographics alone.

    Same top-rate scheme as the MAR mechanism, but each variable's
    missingness model sees only the one-hot demographic design, never other
    responses.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    check_fraction(rate, "rate", inclusive_low=False)
    n, p = matrix.shape
    design, _ = one_hot_demographics(demographics, n)
    missing = np.isnan(matrix)
    rng = rng_for(seed, "mnar")
    observed_by_col = [np.flatnonzero(~missing[:, j]) for j in range(p)]
    quotas = _quotas([len(o) for o in observed_by_col], rate)
    scores_by_col = []
    for j in range(p):
        model = fit_logistic(design, missing[:, j].astype(float))
        scores_by_col.append(model.predict_proba(design))
    rows_out, cols_out = _top_rate_cells(
        [s[observed_by_col[j]] for j, s in enumerate(scores_by_col)],
        observed_by_col,
        quotas,
        rng,
    )
    return _mask_from_cells(
        "mnar",
        rate,
        seed,
        rows_out,
        cols_out,
        row_keys or [("", i) for i in range(n)],
        col_names or [str(j) for j in range(p)],
    )


def split_by_mask(ds, mask):
    """Partition a dataset into (kept, masked) record subsets."""
    masked_cells = {
        (mask.row_keys[r], mask.col_names[c])
        for r, c in zip(mask.row_indices.tolist(), mask.col_indices.tolist())
    }
    flags = np.zeros(ds.n_records, dtype=bool)
    for i in range(ds.n_records):
        cell = (
            (int(ds.respondent_keys[i]), int(ds.record_years[i])),
            ds.variables[ds.question_ids[i]],
        )
        if cell in masked_cells:
            flags[i] = True
    return ds.subset(~flags), ds.subset(flags)


@dataclass
class SyntheticTruth:
    """Latent factors behind a generated survey, for oracle evaluation."""

    individual_factors: np.ndarray  # (n, k)
    question_factors: np.ndarray  # (p, k)
    period_factors: np.ndarray  # (Y, k)
    alpha: float
    beta: float
    logits: np.ndarray  # (n, p, Y)

    def logit(self, individual, question, year_rank):
        return float(self.logits[individual, question, year_rank])


def generate_synthetic_survey(
    n=500,
    p=60,
    years=10,
    latent_dim=8,
    observed_fraction=0.4,
    alpha=0.0,
    beta=1.5,
    noise=0.0,
    embed_dim=32,
    seed=0,
    start_year=2000,
):
    """Plant a three-way interaction survey with matching question vectors.

    Respondent, question, and period factors are standard normal in the
    latent dimension; the response logit for cell (i, j, y) is
    ``alpha + beta * (u_i.q_j + q_j.t_y + u_i.t_y)`` plus optional Gaussian
    noise, and responses are Bernoulli draws. Cells are subsampled uniformly
    to the observed fraction. The emitted embedding matrix carries each
    question's true factor padded with seeded standard-normal columns up to
    ``embed_dim``, so the semantic signal genuinely predicts responses while
    most embedding columns are irrelevant.

    Respondent keys are plain integers shared across years (a panel layout);
    calendar years run from ``start_year``. Returns
    (SurveyDataset, EmbeddingMatrix, SyntheticTruth).
    """
    check_positive(n, "n")
    check_positive(p, "p")
    check_positive(years, "years")
    check_positive(latent_dim, "latent_dim")
    check_fraction(observed_fraction, "observed_fraction", inclusive_low=False, inclusive_high=True)
    if embed_dim < latent_dim:
        raise ConfigError("embed_dim must be at least latent_dim")
    rng = rng_for(seed, "synthetic")
    u = rng.standard_normal((n, latent_dim))
    q = rng.standard_normal((p, latent_dim))
    t = rng.standard_normal((years, latent_dim))
    logits = (
        alpha
        + beta
        * (
            (u @ q.T)[:, :, None]
            + (q @ t.T)[None, :, :]
            + (u @ t.T)[:, None, :]
        )
    )
    if noise > 0:
        logits = logits + noise * rng.standard_normal(logits.shape)
    probs = 1.0 / (1.0 + np.exp(-logits))
    responses = (rng.random((n, p, years)) < probs).astype(np.int64)

    total = n * p * years
    take = int(round(observed_fraction * total))
    flat = rng.permutation(total)[:take]
    ii = flat // (p * years)
    jj = (flat // years) % p
    yy = flat % years

    variables = [f"q{j:03d}" for j in range(p)]
    texts = [
        f"Do you agree with statement {j:03d} from the synthetic item bank?"
        for j in range(p)
    ]
    records = [
        ResponseRecord(
            year=start_year + int(y),
            respondent_key=int(i),
            variable=variables[j],
            question_text=texts[j],
            binarized=int(responses[i, j, y]),
        )
        for i, j, y in zip(ii.tolist(), jj.tolist(), yy.tolist())
    ]
    ds = SurveyDataset(records)

    pad = rng.standard_normal((p, embed_dim - latent_dim)) if embed_dim > latent_dim else np.zeros((p, 0))
    vectors = np.concatenate([q, pad], axis=1).astype(np.float32)
    embeddings = EmbeddingMatrix(
        vectors,
        variables,
        model_tag=f"synthetic-planted-k{latent_dim}-seed{seed}",
        extraction_mode="last-token",
    )
    truth = SyntheticTruth(u, q, t, alpha, beta, logits)
    return ds, embeddings, truth
