"""Cross-validation harness for the three evaluation designs.

Each design partitions a different unit into k folds:

* imputation: individual response triples (respondent, question, year);
* retrodiction: (question, year) cells, by default stratified per year so
  every survey wave loses about the same share of its questions;
* unasked: whole questions, all years at once.

Holding out a unit removes every record it covers from training. A
validation slice (a tenth of the training units, same granularity, drawn
from an independent seeded stream) steers early stopping. All assignment,
shuffling, and dropout randomness descends from one run seed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .data import SurveyDataset
from .dcn import predict_proba_arrays, train_loop, init_params
from .embeddings import EmbeddingMatrix, embedding_array
from .errors import ConfigError, ParseError
from .mf import ObservedMatrix, als_fit, mf_predict
from .seeding import rng_for
from .validation import check_fraction, check_positive

logger = logging.getLogger(__name__)

TASKS = ("imputation", "retrodiction", "unasked")
UNIT_KINDS = {"imputation": "response", "retrodiction": "year_question", "unasked": "question"}


def _check_task(task):
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    return task


@dataclass
class FoldPlan:
    """Deterministic unit -> fold assignment for one evaluation design.

    The assignment is built by sorting the unit keys, shuffling them with a
    PCG64 stream derived from (seed, 'folds', task), and dealing them round
    robin, so fold sizes differ by at most one. Stratified plans deal within
    each year while a rolling offset keeps global fold sizes balanced.
    """

    task: str
    num_folds: int
    unit_kind: str
    seed: int
    stratified: bool
    unit_codes: np.ndarray  # sorted unique composite codes
    unit_folds: np.ndarray  # fold per unit, aligned with unit_codes
    shape_fingerprint: tuple  # (n_individuals, n_questions, n_years)

    @property
    def n_units(self):
        return int(self.unit_codes.shape[0])

    def _check_dataset(self, ds):
        if self.shape_fingerprint != (ds.n_individuals, ds.n_questions, ds.n_years):
            raise ConfigError("fold plan was built for a different dataset")

    def record_unit_codes(self, ds):
        self._check_dataset(ds)
        if self.unit_kind == "response":
            return (
                ds.individual_ids * ds.n_questions + ds.question_ids
            ) * ds.n_years + ds.year_ranks
        if self.unit_kind == "year_question":
            return ds.question_ids * ds.n_years + ds.year_ranks
        return ds.question_ids.copy()

    def record_folds(self, ds):
        codes = self.record_unit_codes(ds)
        pos = np.searchsorted(self.unit_codes, codes)
        if np.any(pos >= self.n_units) or np.any(self.unit_codes[pos] != codes):
            raise ConfigError("dataset contains records outside the fold plan")
        return self.unit_folds[pos]

    def units_in_fold(self, fold):
        return self.unit_codes[self.unit_folds == fold]

    def assignment(self, ds):
        """Readable unit-key -> fold mapping (tuples of raw values)."""
        self._check_dataset(ds)
        out = {}
        for code, fold in zip(self.unit_codes.tolist(), self.unit_folds.tolist()):
            if self.unit_kind == "response":
                rest, yr = divmod(code, ds.n_years)
                ind, qid = divmod(rest, ds.n_questions)
                key = (ds.individuals[ind], ds.variables[qid], ds.years[yr])
            elif self.unit_kind == "year_question":
                qid, yr = divmod(code, ds.n_years)
                key = (ds.variables[qid], ds.years[yr])
            else:
                key = ds.variables[code]
            out[key] = fold
        return out


def _deal(codes, k, rng, offset=0):
    perm = rng.permutation(len(codes))
    folds = np.empty(len(codes), dtype=np.int64)
    folds[perm] = (np.arange(len(codes)) + offset) % k
    return folds


def make_response_folds(ds, k=10, seed=0):
    """Fold each observed (respondent, question, year) triple."""
    check_positive(k, "k")
    codes = np.sort(
        (ds.individual_ids * ds.n_questions + ds.question_ids) * ds.n_years
        + ds.year_ranks
    )
    folds = _deal(codes, k, rng_for(seed, "folds", "imputation"))
    return FoldPlan(
        "imputation", k, "response", seed, False, codes, folds,
        (ds.n_individuals, ds.n_questions, ds.n_years),
    )


def make_year_question_folds(ds, k=10, seed=0, stratify_by_year=True):
    """Fold observed (question, year) cells, by default within each year."""
    check_positive(k, "k")
    codes = np.unique(ds.question_ids * ds.n_years + ds.year_ranks)
    rng = rng_for(seed, "folds", "retrodiction")
    if stratify_by_year:
        folds = np.empty(len(codes), dtype=np.int64)
        offset = 0
        for yr in range(ds.n_years):
            in_year = np.flatnonzero(codes % ds.n_years == yr)
            folds[in_year] = _deal(codes[in_year], k, rng, offset)
            offset += len(in_year)
    else:
        folds = _deal(codes, k, rng)
    return FoldPlan(
        "retrodiction", k, "year_question", seed, stratify_by_year, codes, folds,
        (ds.n_individuals, ds.n_questions, ds.n_years),
    )


def make_question_folds(ds, k=10, seed=0):
    """Fold whole questions; each held-out question vanishes from training."""
    check_positive(k, "k")
    if ds.n_questions < k:
        logger.warning(
            "only %d questions for %d folds; some folds will be empty",
            ds.n_questions,
            k,
        )
    codes = np.arange(ds.n_questions, dtype=np.int64)
    folds = _deal(codes, k, rng_for(seed, "folds", "unasked"))
    return FoldPlan(
        "unasked", k, "question", seed, False, codes, folds,
        (ds.n_individuals, ds.n_questions, ds.n_years),
    )


def plan_for_task(ds, task, k=10, seed=0, stratify_retrodiction=True):
    _check_task(task)
    if task == "imputation":
        return make_response_folds(ds, k, seed)
    if task == "retrodiction":
        return make_year_question_folds(ds, k, seed, stratify_retrodiction)
    return make_question_folds(ds, k, seed)


def _train_on_units(ds, emb64, plan, round_index, cfg, unit_subset=None):
    """Fit on training units (optionally a subset), early-stopped on a slice.

    The validation slice is drawn at the plan's unit granularity from the
    stream (seed, 'validation', task, round), independent of the fold
    shuffle. Returns (params, history, best_epoch, fit_mask, val_mask).
    """
    record_folds = plan.record_folds(ds)
    record_units = plan.record_unit_codes(ds)
    train_mask = record_folds != round_index
    if not train_mask.any():
        raise ConfigError(f"round {round_index} leaves no training records")
    train_units = np.unique(record_units[train_mask])
    if unit_subset is not None:
        keep = np.isin(train_units, unit_subset)
        train_units = train_units[keep]
        train_mask = train_mask & np.isin(record_units, train_units)
        if not train_mask.any():
            raise ConfigError("unit subsampling removed every training record")

    rng = rng_for(cfg.seed, "validation", plan.task, str(round_index))
    perm = rng.permutation(len(train_units))
    n_val = max(1, int(round(cfg.validation_fraction * len(train_units))))
    n_val = min(n_val, len(train_units) - 1)
    val = None
    fit_mask = train_mask
    val_mask = np.zeros_like(train_mask)
    if n_val >= 1:
        val_units = train_units[perm[:n_val]]
        val_mask = train_mask & np.isin(record_units, val_units)
        fit_mask = train_mask & ~val_mask
        if val_mask.any() and fit_mask.any():
            val = (
                ds.individual_ids[val_mask],
                ds.question_ids[val_mask],
                ds.year_ranks[val_mask],
                ds.labels[val_mask],
            )
        else:
            fit_mask = train_mask
            val_mask = np.zeros_like(train_mask)

    params = init_params(
        cfg,
        emb64.shape[1],
        ds.n_individuals,
        ds.n_years,
        seed=cfg.seed,
    )
    train = (
        ds.individual_ids[fit_mask],
        ds.question_ids[fit_mask],
        ds.year_ranks[fit_mask],
        ds.labels[fit_mask],
    )
    best, history, best_epoch = train_loop(
        params, emb64, train, val, cfg, cfg.seed,
        labels=("cv", plan.task, str(round_index)),
    )
    return best, history, best_epoch, fit_mask, val_mask


def train_model(ds, embeddings, plan, round_index, cfg):
    """Train one fold-round model; returns (params, history, best_epoch)."""
    emb64 = _aligned_embeddings(ds, embeddings)
    best, history, best_epoch, _, _ = _train_on_units(
        ds, emb64, plan, round_index, cfg
    )
    return best, history, best_epoch


def _aligned_embeddings(ds, embeddings):
    if isinstance(embeddings, EmbeddingMatrix):
        return embeddings.aligned_to(ds.variables).as_float64()
    emb = embedding_array(embeddings)
    if emb.shape[0] != ds.n_questions:
        raise ConfigError(
            f"embedding matrix has {emb.shape[0]} rows for {ds.n_questions} questions"
        )
    return emb


@dataclass
class PredictionSet:
    """Out-of-fold predictions, one row per held-out record."""

    folds: np.ndarray
    years: np.ndarray
    yearids: np.ndarray
    variables: np.ndarray  # object array of variable names
    observed: np.ndarray
    predicted: np.ndarray

    @property
    def n(self):
        return int(self.folds.shape[0])

    def sorted_canonical(self):
        order = np.lexsort((self.variables, self.yearids, self.years, self.folds))
        return PredictionSet(
            self.folds[order],
            self.years[order],
            self.yearids[order],
            self.variables[order],
            self.observed[order],
            self.predicted[order],
        )

    def to_csv(self, path):
        ps = self.sorted_canonical()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["fold", "year", "yearid", "variable", "observed", "predicted"]
            )
            for i in range(ps.n):
                writer.writerow(
                    [
                        int(ps.folds[i]),
                        int(ps.years[i]),
                        int(ps.yearids[i]),
                        str(ps.variables[i]),
                        int(ps.observed[i]),
                        format(float(ps.predicted[i]), ".12g"),
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        folds, years, yearids, variables, observed, predicted = [], [], [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            needed = {"fold", "year", "yearid", "variable", "observed", "predicted"}
            if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
                raise ParseError(f"{path}: prediction files need columns {sorted(needed)}")
            for line_no, row in enumerate(reader, start=2):
                try:
                    folds.append(int(row["fold"]))
                    years.append(int(row["year"]))
                    yearids.append(int(row["yearid"]))
                    variables.append(row["variable"])
                    observed.append(int(row["observed"]))
                    predicted.append(float(row["predicted"]))
                except (TypeError, ValueError):
                    raise ParseError("bad prediction row", line_no) from None
        if not folds:
            raise ParseError(f"{path}: no prediction rows")
        return cls(
            np.asarray(folds, dtype=np.int64),
            np.asarray(years, dtype=np.int64),
            np.asarray(yearids, dtype=np.int64),
            np.asarray(variables, dtype=object),
            np.asarray(observed, dtype=np.int64),
            np.asarray(predicted, dtype=np.float64),
        )


def _collect_predictions(ds, rows_by_fold, scores_by_fold):
    folds, idx, preds = [], [], []
    for fold, rows in rows_by_fold.items():
        folds.extend([fold] * len(rows))
        idx.extend(rows.tolist())
        preds.extend(scores_by_fold[fold].tolist())
    idx = np.asarray(idx, dtype=np.int64)
    variables = np.asarray([ds.variables[q] for q in ds.question_ids[idx]], dtype=object)
    return PredictionSet(
        np.asarray(folds, dtype=np.int64),
        ds.record_years[idx],
        ds.respondent_keys[idx],
        variables,
        ds.labels[idx].copy(),
        np.asarray(preds, dtype=np.float64),
    ).sorted_canonical()


def run_cross_validation(
    ds, embeddings, task, cfg, k=10, stratify_retrodiction=True, progress=None
):
    """Full k-round out-of-fold evaluation; every record predicted once."""
    _check_task(task)
    emb64 = _aligned_embeddings(ds, embeddings)
    plan = plan_for_task(ds, task, k, cfg.seed, stratify_retrodiction)
    record_folds = plan.record_folds(ds)
    rows_by_fold, scores_by_fold = {}, {}
    for r in range(k):
        held = np.flatnonzero(record_folds == r)
        if held.size == 0:
            continue
        params, _, best_epoch, _, _ = _train_on_units(ds, emb64, plan, r, cfg)
        scores = predict_proba_arrays(
            params,
            emb64,
            ds.individual_ids[held],
            ds.question_ids[held],
            ds.year_ranks[held],
        )
        rows_by_fold[r] = held
        scores_by_fold[r] = scores
        if progress is not None:
            progress(r, held.size, best_epoch)
    return _collect_predictions(ds, rows_by_fold, scores_by_fold)


def run_mf_cross_validation(ds, task, k=10, seed=0, rank=50, ridge=10.0,
                            iterations=15, stratify_retrodiction=True):
    """Out-of-fold ALS baseline under the same fold plans as the network.

    The pooled respondent x question matrix is rebuilt from each round's
    training records. Never-asked questions have no column factor at all, so
    the unasked design is rejected rather than faked.
    """
    _check_task(task)
    if task == "unasked":
        raise ConfigError(
            "the factorization baseline cannot score never-asked questions: "
            "a held-out question has no trained column factor"
        )
    plan = plan_for_task(ds, task, k, seed, stratify_retrodiction)
    record_folds = plan.record_folds(ds)
    rows_by_fold, scores_by_fold = {}, {}
    for r in range(k):
        held = np.flatnonzero(record_folds == r)
        if held.size == 0:
            continue
        matrix = ObservedMatrix.from_dataset(ds, record_folds != r)
        factors = als_fit(
            matrix, rank=rank, ridge=ridge, iterations=iterations,
            seed=seed, track_objective=False,
        )
        scores_by_fold[r] = mf_predict(
            factors, ds.individual_ids[held], ds.question_ids[held]
        )
        rows_by_fold[r] = held
    return _collect_predictions(ds, rows_by_fold, scores_by_fold)


def train_full_dataset(ds, embeddings, cfg):
    """Train one model on the whole dataset with a row-level holdout.

    A tenth of the records (seeded stream 'validation'/'full') steers early
    stopping; the rest train. Returns (params, history, best_epoch).
    """
    emb64 = _aligned_embeddings(ds, embeddings)
    rng = rng_for(cfg.seed, "validation", "full")
    n = ds.n_records
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.validation_fraction * n)))
    n_val = min(n_val, n - 1)
    val_rows, fit_rows = perm[:n_val], perm[n_val:]
    params = init_params(cfg, emb64.shape[1], ds.n_individuals, ds.n_years, seed=cfg.seed)

    def pick(rows):
        return (
            ds.individual_ids[rows],
            ds.question_ids[rows],
            ds.year_ranks[rows],
            ds.labels[rows],
        )

    return train_loop(
        params, emb64, pick(fit_rows), pick(val_rows), cfg, cfg.seed, labels=("full",)
    )


def retrodiction_rows(ds, embeddings, params, variables=None):
    """Predict every (respondent, variable, year) cell for chosen variables.

    For each survey year the respondents actually interviewed that year are
    scored on every requested variable, asked or not. Rows carry the true
    response where one exists and NaN otherwise, plus resolved survey
    weights, ready for weighted aggregation.
    """
    from .data import resolve_weights

    emb64 = _aligned_embeddings(ds, embeddings)
    if variables is None:
        variables = list(ds.variables)
    unknown = [v for v in variables if v not in ds.question_index]
    if unknown:
        raise ConfigError(f"variables not in dataset: {unknown[:8]}")
    weight_of = resolve_weights(ds)
    label_of = {}
    for i in range(ds.n_records):
        label_of[
            (int(ds.individual_ids[i]), int(ds.question_ids[i]), int(ds.year_ranks[i]))
        ] = float(ds.labels[i])

    out_var, out_year, out_key, out_pred, out_label, out_weight = [], [], [], [], [], []
    for yr, year in enumerate(ds.years):
        in_year = ds.year_ranks == yr
        inds = np.unique(ds.individual_ids[in_year])
        keys = np.asarray([ds.individuals[i] for i in inds], dtype=np.int64)
        weights = np.asarray([weight_of(k, year) for k in keys])
        for variable in variables:
            qid = ds.question_index[variable]
            preds = predict_proba_arrays(
                params,
                emb64,
                inds,
                np.full(inds.shape, qid, dtype=np.int64),
                np.full(inds.shape, yr, dtype=np.int64),
            )
            labels = np.asarray(
                [label_of.get((int(i), qid, yr), np.nan) for i in inds]
            )
            out_var.extend([variable] * len(inds))
            out_year.extend([int(year)] * len(inds))
            out_key.extend(keys.tolist())
            out_pred.extend(preds.tolist())
            out_label.extend(labels.tolist())
            out_weight.extend(weights.tolist())
    return (
        np.asarray(out_var, dtype=object),
        np.asarray(out_year, dtype=np.int64),
        np.asarray(out_key, dtype=np.int64),
        np.asarray(out_pred, dtype=np.float64),
        np.asarray(out_label, dtype=np.float64),
        np.asarray(out_weight, dtype=np.float64),
    )


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    auc: float
    n_train_records: int


def missingness_sweep(ds, embeddings, task, fractions, cfg, k=10, round_index=0):
    """Degrade training volume and rescore one held-out fold.

    For each fraction f, a seeded (1 - f) subsample of the round's training
    units survives (same granularity as the fold units) and the held-out
    fold is scored with AUC. f = 0 reproduces the standard round exactly.
    """
    from .analysis import auc as auc_metric

    _check_task(task)
    emb64 = _aligned_embeddings(ds, embeddings)
    plan = plan_for_task(ds, task, k, cfg.seed)
    record_folds = plan.record_folds(ds)
    record_units = plan.record_unit_codes(ds)
    held = np.flatnonzero(record_folds == round_index)
    if held.size == 0:
        raise ConfigError(f"fold {round_index} holds no records")
    train_units_all = np.unique(record_units[record_folds != round_index])
    points = []
    for fraction in fractions:
        check_fraction(fraction, "fraction", inclusive_low=True)
        if fraction == 0:
            subset = None
            n_keep = len(train_units_all)
        else:
            rng = rng_for(
                cfg.seed, "sweep", task, str(round_index), format(fraction, ".12g")
            )
            n_keep = max(1, int(round((1.0 - fraction) * len(train_units_all))))
            subset = train_units_all[rng.permutation(len(train_units_all))[:n_keep]]
        params, _, _, fit_mask, _ = _train_on_units(
            ds, emb64, plan, round_index, cfg, unit_subset=subset
        )
        scores = predict_proba_arrays(
            params,
            emb64,
            ds.individual_ids[held],
            ds.question_ids[held],
            ds.year_ranks[held],
        )
        points.append(
            SweepPoint(
                float(fraction),
                auc_metric(ds.labels[held], scores),
                int(fit_mask.sum()),
            )
        )
    return points
