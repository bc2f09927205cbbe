"""Evaluation metrics and population-level aggregation.

Individual-level scores (AUC, accuracy, precision, recall, F1) operate on
pooled prediction/label arrays. Population-level helpers aggregate predicted
probabilities into survey-weighted proportions per (variable, year) cell,
fit one global linear rescaling against observed proportions, and score
margin agreement. Trend smoothing uses locally weighted linear regression
with a tricube kernel; the opinion-level regression uses OLS with an HC1
sandwich covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as _scipy_stats

from .errors import (
    CoverageError,
    InsufficientDataError,
    SingularDesignError,
    SingularFitError,
    UndefinedMetricError,
)
from .validation import (
    as_float_array,
    check_binary_labels,
    check_both_classes,
    check_fraction,
)

# Slack added to margin comparisons so proportions sitting exactly on the
# boundary are counted correct despite float rounding.
_MARGIN_SLACK = 1e-12


def auc(labels, scores):
    """Probability a random positive outranks a random negative (ties half).

    Computed from average ranks in O(n log n); exactly equal to pairwise
    counting because tied ranks stay on the 0.5 grid.
    """
    labels = check_binary_labels(labels)
    scores = as_float_array(scores, "scores")
    if labels.shape != scores.shape:
        raise UndefinedMetricError("labels and scores must align")
    n_pos, n_neg = check_both_classes(labels)
    n = labels.shape[0]
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    new_group = np.empty(n, dtype=bool)
    new_group[0] = True
    np.not_equal(s[1:], s[:-1], out=new_group[1:])
    group_of = np.cumsum(new_group) - 1
    starts = np.flatnonzero(new_group)
    ends = np.append(starts[1:], n)
    # average 1-based rank of each tie group: positions start..end-1
    group_rank = (starts + ends - 1) / 2.0 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = group_rank[group_of]
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float
    n: int


def accuracy_f1(labels, scores, threshold=0.5):
    """Threshold scores (strictly greater) and report the usual four rates.

    Empty denominators follow the zero convention: no predicted positives
    gives precision 0, no actual positives gives recall 0, and F1 is 0
    whenever precision + recall is 0.
    """
    labels = check_binary_labels(labels)
    scores = as_float_array(scores, "scores")
    preds = (scores > threshold).astype(np.int64)
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    tn = int(np.sum((preds == 0) & (labels == 0)))
    n = tp + fp + fn + tn
    accuracy = (tp + tn) / n
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom else 0.0
    return ClassificationScores(accuracy, precision, recall, f1, threshold, n)


def correlation(x, y):
    """Pearson correlation; zero variance on either side is undefined."""
    x = as_float_array(x, "x")
    y = as_float_array(y, "y")
    if x.shape != y.shape or x.size < 2:
        raise UndefinedMetricError("correlation needs two aligned series, n >= 2")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("correlation undefined for a constant series")
    return float(np.corrcoef(x, y)[0, 1])


def group_auc(labels, scores, groups):
    """AUC per group key; single-class groups are excluded and counted."""
    labels = check_binary_labels(labels)
    scores = as_float_array(scores, "scores")
    groups = np.asarray(groups)
    if not (labels.shape == scores.shape == groups.shape):
        raise UndefinedMetricError("labels, scores, and groups must align")
    order = np.argsort(groups, kind="mergesort")
    results = {}
    excluded = 0
    start = 0
    g_sorted = groups[order]
    while start < len(order):
        end = start
        while end < len(order) and g_sorted[end] == g_sorted[start]:
            end += 1
        rows = order[start:end]
        y = labels[rows]
        if y.min() == y.max():
            excluded += 1
        else:
            key = g_sorted[start]
            key = key.item() if hasattr(key, "item") else key
            results[key] = auc(y, scores[rows])
        start = end
    return results, excluded


@dataclass(frozen=True)
class AggregatedCell:
    """Survey-weighted proportions for one (variable, year)."""

    variable: str
    year: int
    predicted: float
    observed: float | None
    count: int
    total_weight: float


def weighted_aggregate(variables, years, predictions, weights, labels=None):
    """Collapse predictions into weighted proportions per (variable, year).

    ``labels`` may be omitted or carry NaN where no observation exists; the
    observed proportion of a cell uses only its labeled entries and is None
    when there are none.
    """
    variables = np.asarray(variables, dtype=object)
    years = np.asarray(years, dtype=np.int64)
    predictions = as_float_array(predictions, "predictions")
    weights = as_float_array(weights, "weights")
    if not (len(variables) == len(years) == len(predictions) == len(weights)):
        raise CoverageError("aggregation inputs must align")
    if np.any(weights <= 0):
        raise CoverageError("weights must be positive for every prediction")
    if labels is None:
        labels = np.full(len(predictions), np.nan)
    else:
        labels = np.asarray(labels, dtype=np.float64)

    cells = {}
    for i in range(len(predictions)):
        cells.setdefault((variables[i], int(years[i])), []).append(i)
    out = []
    for (variable, year), rows in sorted(cells.items()):
        rows = np.asarray(rows)
        w = weights[rows]
        total = float(np.sum(w))
        predicted = float(np.sum(w * predictions[rows]) / total)
        lab = labels[rows]
        has = ~np.isnan(lab)
        if has.any():
            observed = float(np.sum(w[has] * lab[has]) / np.sum(w[has]))
        else:
            observed = None
        out.append(
            AggregatedCell(str(variable), year, predicted, observed, len(rows), total)
        )
    return out


@dataclass(frozen=True)
class CalibrationLine:
    """One global linear map from predicted to observed proportions."""

    slope: float
    intercept: float
    r_squared: float
    n: int

    def apply(self, predicted, clip=True):
        value = self.slope * np.asarray(predicted, dtype=np.float64) + self.intercept
        if clip:
            value = np.clip(value, 0.0, 1.0)
        return value


def fit_rescaling(cells):
    """Least-squares observed ~ predicted over cells with observations."""
    pairs = [(c.predicted, c.observed) for c in cells if c.observed is not None]
    if len(pairs) < 2:
        raise SingularFitError("rescaling needs at least two observed cells")
    x = np.array([p for p, _ in pairs])
    y = np.array([o for _, o in pairs])
    if np.ptp(x) == 0:
        raise SingularFitError("rescaling undefined: all predictions identical")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    sxy = float(np.sum((x - xm) * (y - ym)))
    slope = sxy / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    syy = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / syy if syy > 0 else 1.0
    return CalibrationLine(slope, intercept, r2, len(pairs))


def apply_rescaling(cells, line, clip=True):
    """Rescale every cell's predicted proportion with one shared line."""
    return [
        replace(c, predicted=float(line.apply(c.predicted, clip=clip)))
        for c in cells
    ]


def margin_correct_rate(cells, margin=0.03):
    """Share of observed cells whose rescaled prediction sits within margin.

    The comparison is inclusive at the boundary.
    """
    check_fraction(margin, "margin", inclusive_low=False, inclusive_high=False)
    scored = [c for c in cells if c.observed is not None]
    if not scored:
        raise UndefinedMetricError("no cells carry observed proportions")
    hits = sum(
        1 for c in scored if abs(c.predicted - c.observed) <= margin + _MARGIN_SLACK
    )
    return hits / len(scored)


@dataclass(frozen=True)
class TrendPoint:
    year: int
    fit: float
    lower: float
    upper: float


def _local_linear_weights(x, x0, span, counts):
    """Hat vector of the tricube-weighted local linear fit at x0."""
    n = len(x)
    q = max(3, int(np.ceil(span * n)))
    q = min(q, n)
    d = np.abs(x - x0)
    d_q = np.sort(d)[q - 1]
    if d_q == 0:
        kernel = np.ones(n)
    else:
        u = np.minimum(d / d_q, 1.0)
        kernel = (1 - u**3) ** 3
    w = kernel * counts
    if np.sum(w > 0) < 2 or np.ptp(x[w > 0]) == 0:
        # Too few usable neighbors for a slope: weighted mean fallback.
        if np.sum(w) == 0:
            w = counts.astype(float)
        return w / np.sum(w)
    design = np.column_stack([np.ones(n), x - x0])
    wd = design * w[:, None]
    gram = design.T @ wd
    try:
        beta_map = np.linalg.solve(gram, wd.T)
    except np.linalg.LinAlgError:
        return w / np.sum(w)
    return beta_map[0]


def smooth_trend(series, span=0.75, grid=None):
    """Smooth (year, proportion, count) points onto an annual grid.

    Locally weighted degree-1 regression with a tricube kernel over the
    nearest span-fraction of points; counts act as extra case weights. The
    pointwise band is fit +- 1.96 residual-based standard errors, with the
    residual scale taken as sqrt(RSS / max(n - 2, 1)) from the in-sample
    fits. Constant input smooths to the constant and an exactly linear
    series is reproduced.
    """
    check_fraction(span, "span", inclusive_low=False, inclusive_high=True)
    pts = sorted((int(y), float(p), float(c)) for y, p, c in series)
    if len(pts) < 3:
        raise InsufficientDataError("trend smoothing needs at least 3 points")
    x = np.array([p[0] for p in pts], dtype=np.float64)
    if np.ptp(x) == 0:
        raise InsufficientDataError("trend smoothing needs more than one year")
    y = np.array([p[1] for p in pts])
    counts = np.array([max(p[2], 0.0) for p in pts])
    if np.all(counts == 0):
        counts = np.ones_like(counts)

    fitted = np.array(
        [float(_local_linear_weights(x, xi, span, counts) @ y) for xi in x]
    )
    resid = y - fitted
    sigma = float(np.sqrt(np.sum(resid**2) / max(len(x) - 2, 1)))

    if grid is None:
        grid = np.arange(int(x.min()), int(x.max()) + 1)
    out = []
    for x0 in grid:
        hat = _local_linear_weights(x, float(x0), span, counts)
        fit = float(hat @ y)
        se = sigma * float(np.sqrt(np.sum(hat**2)))
        out.append(TrendPoint(int(x0), fit, fit - 1.96 * se, fit + 1.96 * se))
    return out


@dataclass(frozen=True)
class RegressionResult:
    names: tuple
    coefficients: np.ndarray
    covariance: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    significant: np.ndarray
    n: int
    k: int


def ols_robust(y, design, names=None, alpha=0.05):
    """OLS with an HC1 heteroskedasticity-robust sandwich covariance.

    The design matrix must already include any intercept column. Standard
    errors carry the n / (n - k) small-sample correction; two-sided p-values
    use a t reference with n - k degrees of freedom.
    """
    y = as_float_array(y, "y")
    design = np.asarray(design, dtype=np.float64)
    if design.ndim == 1:
        design = design[:, None]
    n, k = design.shape
    if y.shape[0] != n:
        raise SingularDesignError("y and design matrix must align")
    if n <= k:
        raise SingularDesignError(f"need more rows ({n}) than columns ({k})")
    if np.linalg.matrix_rank(design) < k:
        raise SingularDesignError("design matrix is rank deficient")
    gram = design.T @ design
    gram_inv = np.linalg.inv(gram)
    beta = gram_inv @ (design.T @ y)
    resid = y - design @ beta
    meat = design.T @ (design * (resid**2)[:, None])
    cov = gram_inv @ meat @ gram_inv * (n / (n - k))
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.inf))
    p_values = 2.0 * _scipy_stats.t.sf(np.abs(t_values), df=n - k)
    if names is None:
        names = tuple(f"x{i}" for i in range(k))
    return RegressionResult(
        names=tuple(names),
        coefficients=beta,
        covariance=cov,
        std_errors=se,
        t_values=t_values,
        p_values=p_values,
        significant=p_values < alpha,
        n=n,
        k=k,
    )


def standardize(matrix):
    """Z-score columns; constant columns become all zeros."""
    matrix = np.asarray(matrix, dtype=np.float64)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std_safe = np.where(std == 0, 1.0, std)
    return (matrix - mean) / std_safe


def opinion_covariates(ds, ideology=None, embeddings=None):
    """Per-(variable, year) covariates for opinion-level regressions.

    Columns: sample size, response rate (cell count over that year's
    respondent count), response variance p(1-p), and optionally the absolute
    correlation with a per-respondent ideology score and the question's mean
    cosine similarity to the other questions. Returns (cell keys, raw
    matrix, column names); callers standardize before regressing.
    """
    from .data import dataset_stats  # local import to avoid a cycle

    stats = dataset_stats(ds)
    year_respondents = {}
    for i in range(ds.n_records):
        year_respondents.setdefault(int(ds.record_years[i]), set()).add(
            int(ds.respondent_keys[i])
        )

    cos_by_variable = None
    if embeddings is not None:
        vecs = embeddings.aligned_to(ds.variables).as_float64()
        norms = np.linalg.norm(vecs, axis=1)
        norms[norms == 0] = 1.0
        unit = vecs / norms[:, None]
        sims = unit @ unit.T
        p = len(ds.variables)
        cos_by_variable = {
            v: float((sims[i].sum() - 1.0) / max(p - 1, 1))
            for i, v in enumerate(ds.variables)
        }

    keys, rows = [], []
    names = ["sample_size", "response_rate", "response_variance"]
    if ideology is not None:
        names.append("ideology_correlation")
    if cos_by_variable is not None:
        names.append("mean_cosine_similarity")

    for (variable, year), (count, share) in sorted(stats.cells.items()):
        row = [
            float(count),
            count / len(year_respondents[year]),
            share * (1.0 - share),
        ]
        if ideology is not None:
            qid = ds.question_index[variable]
            yr = ds.year_index[year]
            mask = (ds.question_ids == qid) & (ds.year_ranks == yr)
            ids = ds.respondent_keys[mask]
            vals = np.array([ideology.get(int(i), np.nan) for i in ids])
            ok = ~np.isnan(vals)
            lab = ds.labels[mask][ok].astype(np.float64)
            if ok.sum() >= 3 and np.ptp(vals[ok]) > 0 and np.ptp(lab) > 0:
                row.append(abs(float(np.corrcoef(vals[ok], lab)[0, 1])))
            else:
                row.append(0.0)
        if cos_by_variable is not None:
            row.append(cos_by_variable[variable])
        keys.append((variable, year))
        rows.append(row)
    return keys, np.asarray(rows, dtype=np.float64), names
