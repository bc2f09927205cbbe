"""Sparse binary survey response store.

The canonical on-disk form is delimited text with header
``year,yearid,variable,question,binarized`` plus an optional ``weight``
column. ``yearid`` is the raw respondent key. Keys that follow the
year-prefixed convention satisfy ``yearid // 10000 == year``; plain keys are
also accepted, in which case a respondent is identified by the key alone and
may appear in several years (a panel-style layout).

Dense integer IDs for respondents, variables, and years are assigned by
ascending sort order of the raw values, so two ingests of the same record set
always agree on the ID maps.
"""

from __future__ import annotations

import csv
import importlib.resources
import io
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DuplicateKeyError,
    InvalidResponseError,
    ParseError,
    UnknownLabelError,
    UnmappedOptionSetError,
)

logger = logging.getLogger(__name__)

CANONICAL_COLUMNS = ("year", "yearid", "variable", "question", "binarized")


@dataclass(frozen=True)
class ResponseRecord:
    """One binarized answer: respondent x variable x year."""

    year: int
    respondent_key: int
    variable: str
    question_text: str
    binarized: int
    weight: float = 1.0


def encode_ids(raw_keys):
    """Map raw keys to dense IDs 0..n-1 in ascending sorted order."""
    return {key: idx for idx, key in enumerate(sorted(set(raw_keys)))}


def normalize_label(label):
    """Canonical form used for option-set lookups: trimmed and case-folded."""
    return str(label).strip().casefold()


class BinarizationMap:
    """Response-option to bit mapping, loaded from a finished mapping file.

    File columns: ``option_set_key,option_label,bit``. Rows sharing an
    ``option_set_key`` form one ordered option set. Lookup is exact on the
    normalized label tuple; no fuzzy matching is attempted, and option sets
    without an entry are a hard error so scale polarity is never guessed.
    """

    def __init__(self, entries):
        # entries: dict key -> list of (raw_label, bit)
        self._by_key = {}
        self._by_labels = {}
        for key, pairs in entries.items():
            mapping = {}
            ordered = []
            for raw_label, bit in pairs:
                norm = normalize_label(raw_label)
                if bit not in (0, 1):
                    raise InvalidResponseError(
                        f"option set {key!r}: bit for {raw_label!r} must be 0 or 1"
                    )
                if norm in mapping:
                    raise DuplicateKeyError(
                        f"option set {key!r}: duplicate label {raw_label!r}"
                    )
                mapping[norm] = int(bit)
                ordered.append(norm)
            label_key = tuple(ordered)
            if label_key in self._by_labels:
                raise DuplicateKeyError(
                    f"two option sets share the same labels: {label_key}"
                )
            self._by_key[key] = mapping
            self._by_labels[label_key] = mapping

    def __len__(self):
        return len(self._by_key)

    def lookup(self, option_set):
        label_key = tuple(normalize_label(lbl) for lbl in option_set)
        entry = self._by_labels.get(label_key)
        if entry is None:
            raise UnmappedOptionSetError(
                f"no binarization entry for option set {list(option_set)!r}"
            )
        return entry

    def lookup_key(self, option_set_key):
        entry = self._by_key.get(option_set_key)
        if entry is None:
            raise UnmappedOptionSetError(
                f"no binarization entry for option set key {option_set_key!r}"
            )
        return entry

    @classmethod
    def load(cls, path):
        entries = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"option_set_key", "option_label", "bit"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ParseError(
                    f"binarization map must have columns {sorted(required)}"
                )
            for line_no, row in enumerate(reader, start=2):
                try:
                    bit = int(row["bit"])
                except (TypeError, ValueError):
                    raise InvalidResponseError(
                        f"bit {row.get('bit')!r} is not an integer", line_no
                    ) from None
                entries.setdefault(row["option_set_key"], []).append(
                    (row["option_label"], bit)
                )
        return cls(entries)


def apply_binarization(raw_label, option_set, bmap):
    """Binarize one raw response label against its ordered option set."""
    entry = bmap.lookup(option_set)
    norm = normalize_label(raw_label)
    if norm not in entry:
        raise UnknownLabelError(
            f"label {raw_label!r} not in option set {list(option_set)!r}"
        )
    return entry[norm]


def default_binarization_map():
    """Load the mapping table bundled with the package.

    Covers the fifty most common option sets in long-running US opinion
    surveys (agree/disagree scales, yes/no variants, spending scales and
    the like). Anything else needs a user-supplied mapping file.
    """
    ref = importlib.resources.files(__package__) / "data" / "binarization_top50.csv"
    with importlib.resources.as_file(ref) as path:
        return BinarizationMap.load(path)


class SurveyDataset:
    """Indexed, array-backed view of a set of ResponseRecords.

    The triple (respondent, variable, year) is unique across records. Arrays
    are aligned: element ``i`` of every array describes the same record.
    """

    def __init__(self, records):
        # an empty record list is legal: a header-only file ingests to an
        # empty dataset rather than an error
        records = list(records)
        seen = set()
        for rec in records:
            key = (rec.respondent_key, rec.variable, rec.year)
            if key in seen:
                raise DuplicateKeyError(
                    f"duplicate record for respondent {rec.respondent_key}, "
                    f"variable {rec.variable!r}, year {rec.year}"
                )
            seen.add(key)
            if rec.binarized not in (0, 1):
                raise InvalidResponseError(
                    f"binarized value {rec.binarized!r} must be 0 or 1"
                )
            if not np.isfinite(rec.weight) or rec.weight <= 0:
                raise ConfigError(
                    f"weight {rec.weight!r} for respondent {rec.respondent_key} "
                    "must be finite and positive"
                )

        self.individual_index = encode_ids(r.respondent_key for r in records)
        self.question_index = encode_ids(r.variable for r in records)
        self.year_index = encode_ids(r.year for r in records)

        self.individuals = sorted(self.individual_index)
        self.variables = sorted(self.question_index)
        self.years = sorted(self.year_index)

        n = len(records)
        self.individual_ids = np.empty(n, dtype=np.int64)
        self.question_ids = np.empty(n, dtype=np.int64)
        self.year_ranks = np.empty(n, dtype=np.int64)
        self.record_years = np.empty(n, dtype=np.int64)
        self.respondent_keys = np.empty(n, dtype=np.int64)
        self.labels = np.empty(n, dtype=np.int64)
        self.weights = np.empty(n, dtype=np.float64)

        texts = {}
        for i, rec in enumerate(records):
            self.individual_ids[i] = self.individual_index[rec.respondent_key]
            self.question_ids[i] = self.question_index[rec.variable]
            self.year_ranks[i] = self.year_index[rec.year]
            self.record_years[i] = rec.year
            self.respondent_keys[i] = rec.respondent_key
            self.labels[i] = rec.binarized
            self.weights[i] = rec.weight
            prior = texts.get(rec.variable)
            if prior is None:
                texts[rec.variable] = rec.question_text
            elif prior != rec.question_text and rec.question_text:
                logger.warning(
                    "variable %s has conflicting question texts; keeping the first",
                    rec.variable,
                )
        self.question_texts = [texts.get(v, "") for v in self.variables]

    @property
    def n_records(self):
        return int(self.labels.shape[0])

    @property
    def n_individuals(self):
        return len(self.individual_index)

    @property
    def n_questions(self):
        return len(self.question_index)

    @property
    def n_years(self):
        return len(self.year_index)

    def records(self):
        for i in range(self.n_records):
            yield ResponseRecord(
                year=int(self.record_years[i]),
                respondent_key=int(self.respondent_keys[i]),
                variable=self.variables[self.question_ids[i]],
                question_text=self.question_texts[self.question_ids[i]],
                binarized=int(self.labels[i]),
                weight=float(self.weights[i]),
            )

    def record_at(self, i):
        return ResponseRecord(
            year=int(self.record_years[i]),
            respondent_key=int(self.respondent_keys[i]),
            variable=self.variables[self.question_ids[i]],
            question_text=self.question_texts[self.question_ids[i]],
            binarized=int(self.labels[i]),
            weight=float(self.weights[i]),
        )

    def subset(self, mask):
        """New dataset from the records selected by a boolean mask."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_records,):
            raise ConfigError("subset mask must be one flag per record")
        if not mask.any():
            raise ConfigError("subset mask selects no records")
        picked = np.flatnonzero(mask)
        return SurveyDataset([self.record_at(int(i)) for i in picked])

    def question_text_of(self, variable):
        return self.question_texts[self.question_index[variable]]

    def keys_follow_year_prefix(self):
        """True when every respondent key encodes its record's year."""
        return bool(np.all(self.respondent_keys // 10000 == self.record_years))

    def to_csv(self, path):
        """Serialize in canonical order (year, yearid, variable)."""
        order = np.lexsort(
            (self.question_ids, self.respondent_keys, self.record_years)
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(CANONICAL_COLUMNS) + ["weight"])
            for i in order:
                writer.writerow(
                    [
                        int(self.record_years[i]),
                        int(self.respondent_keys[i]),
                        self.variables[self.question_ids[i]],
                        self.question_texts[self.question_ids[i]],
                        int(self.labels[i]),
                        format(float(self.weights[i]), ".12g"),
                    ]
                )


def _resolve_filters(include, exclude):
    include_set = set(include) if include else None
    exclude_set = set(exclude) if exclude else set()
    if include_set is not None and include_set & exclude_set:
        raise ConfigError(
            f"variables cannot be both included and excluded: "
            f"{sorted(include_set & exclude_set)}"
        )
    return include_set, exclude_set


def _parse_rows(reader, path, use_weights, include_set, exclude_set, bmap=None):
    header = reader.fieldnames
    if header is None:
        raise ParseError(f"{path}: empty file")
    raw_mode = "response" in header and "binarized" not in header
    needed = set(CANONICAL_COLUMNS)
    if raw_mode:
        needed = (needed - {"binarized"}) | {"response", "option_set_key"}
        if bmap is None:
            raise ConfigError(
                "raw response files need a binarization map to be ingested"
            )
    missing = needed - set(header)
    if missing:
        raise ParseError(f"{path}: missing columns {sorted(missing)}")
    has_weight = use_weights and "weight" in header

    records = []
    saw_rows = False
    for line_no, row in enumerate(reader, start=2):
        saw_rows = True
        variable = row["variable"]
        if variable is None or variable == "":
            raise ParseError("empty variable name", line_no)
        if include_set is not None and variable not in include_set:
            continue
        if variable in exclude_set:
            continue
        try:
            year = int(row["year"])
            key = int(row["yearid"])
        except (TypeError, ValueError):
            raise ParseError(
                f"year {row.get('year')!r} / yearid {row.get('yearid')!r} "
                "must be integers",
                line_no,
            ) from None
        if raw_mode:
            entry = bmap.lookup_key(row["option_set_key"])
            norm = normalize_label(row["response"])
            if norm not in entry:
                raise UnknownLabelError(
                    f"line {line_no}: label {row['response']!r} not in option "
                    f"set {row['option_set_key']!r}"
                )
            value = entry[norm]
        else:
            raw_value = row["binarized"]
            if raw_value not in ("0", "1"):
                raise InvalidResponseError(
                    f"binarized value {raw_value!r} must be 0 or 1", line_no
                )
            value = int(raw_value)
        weight = 1.0
        if has_weight and row.get("weight") not in (None, ""):
            try:
                weight = float(row["weight"])
            except ValueError:
                raise ParseError(f"bad weight {row['weight']!r}", line_no) from None
        records.append(
            ResponseRecord(
                year=year,
                respondent_key=key,
                variable=variable,
                question_text=row.get("question") or "",
                binarized=value,
                weight=weight,
            )
        )
    if not records and saw_rows:
        # a header-only file is a legitimate empty dataset; filters that
        # discard every row are almost certainly a mistyped variable name
        raise ConfigError(f"{path}: no records left after filtering")
    return records


def ingest_responses(path, use_weights=True, include=None, exclude=None, bmap=None):
    """Read a canonical (or raw labeled) response file into a SurveyDataset.

    Args:
        path: delimited-text file with the canonical header. Files carrying a
            ``response`` column plus ``option_set_key`` instead of
            ``binarized`` are binarized on the fly through ``bmap``.
        use_weights: honor a ``weight`` column when present. When absent every
            record gets weight 1.0.
        include / exclude: optional variable-name filters; a variable in both
            lists is a configuration error.
        bmap: BinarizationMap, required only for raw labeled files.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records = _parse_rows(
            reader, path, use_weights, *_resolve_filters(include, exclude), bmap=bmap
        )
    return SurveyDataset(records)


def ingest_responses_text(text, **kwargs):
    """ingest_responses over an in-memory string (test convenience)."""
    reader = csv.DictReader(io.StringIO(text))
    include_set, exclude_set = _resolve_filters(
        kwargs.pop("include", None), kwargs.pop("exclude", None)
    )
    records = _parse_rows(
        reader,
        "<string>",
        kwargs.pop("use_weights", True),
        include_set,
        exclude_set,
        bmap=kwargs.pop("bmap", None),
    )
    return SurveyDataset(records)


@dataclass
class DatasetStats:
    """Per-cell, per-question, and per-year observation summaries."""

    n_individuals: int
    n_questions: int
    n_years: int
    n_records: int
    sparsity: float
    cells: dict  # (variable, year) -> (count, positive_share)
    question_counts: dict
    year_counts: dict

    def cell_count(self, variable, year):
        return self.cells.get((variable, year), (0, None))[0]

    def cell_share(self, variable, year):
        return self.cells.get((variable, year), (0, None))[1]

    def rows(self):
        for (variable, year), (count, share) in sorted(self.cells.items()):
            yield variable, year, count, share


def dataset_stats(ds):
    cells = {}
    combo = ds.question_ids * ds.n_years + ds.year_ranks
    order = np.argsort(combo, kind="mergesort")
    sorted_combo = combo[order]
    starts = [True] if ds.n_records else []
    boundaries = np.flatnonzero(
        np.concatenate((starts, sorted_combo[1:] != sorted_combo[:-1]))
    )
    ends = np.append(boundaries[1:], len(order))
    for start, end in zip(boundaries, ends):
        rows = order[start:end]
        qid = int(ds.question_ids[rows[0]])
        year = ds.years[ds.year_ranks[rows[0]]]
        count = end - start
        share = float(np.mean(ds.labels[rows]))
        cells[(ds.variables[qid], int(year))] = (int(count), share)

    question_counts = {
        ds.variables[qid]: int(c)
        for qid, c in zip(*np.unique(ds.question_ids, return_counts=True))
    }
    year_counts = {
        int(ds.years[yr]): int(c)
        for yr, c in zip(*np.unique(ds.year_ranks, return_counts=True))
    }
    denom = ds.n_individuals * ds.n_questions * ds.n_years
    return DatasetStats(
        n_individuals=ds.n_individuals,
        n_questions=ds.n_questions,
        n_years=ds.n_years,
        n_records=ds.n_records,
        sparsity=ds.n_records / denom if denom else 0.0,
        cells=cells,
        question_counts=question_counts,
        year_counts=year_counts,
    )


def resolve_weights(ds):
    """Weight lookup for (respondent_key, year) pairs.

    A respondent-year's weight is the mean weight over their observed records
    that year; respondents never seen in the requested year fall back to
    their overall mean, and unknown respondents to 1.0.
    """
    by_pair = {}
    by_key = {}
    for i in range(ds.n_records):
        pair = (int(ds.respondent_keys[i]), int(ds.record_years[i]))
        by_pair.setdefault(pair, []).append(ds.weights[i])
        by_key.setdefault(pair[0], []).append(ds.weights[i])
    pair_mean = {k: float(np.mean(v)) for k, v in by_pair.items()}
    key_mean = {k: float(np.mean(v)) for k, v in by_key.items()}

    def lookup(respondent_key, year):
        pair = (int(respondent_key), int(year))
        if pair in pair_mean:
            return pair_mean[pair]
        return key_mean.get(int(respondent_key), 1.0)

    return lookup
