"""Question table input.

The extractor accepts any CSV carrying ``variable`` and ``question`` columns,
which covers both a bare two-column question list and the consumer's
canonical response file. Rows are deduplicated by variable (the first text
wins, later conflicting text is logged) and returned sorted by variable
name. That ascending order is the consumer's dense question order, so vector
row ``i`` always belongs to sorted variable ``i``.
"""

from __future__ import annotations

import csv
import logging

from .errors import EmptyQuestionError, EmptyQuestionSetError, QuestionFileError

logger = logging.getLogger(__name__)


def read_question_table(path):
    """Read (variable, question text) pairs, deduplicated and sorted.

    Returns a list of ``(variable, text)`` tuples in ascending variable
    order. Blank variables and blank question text are rejected with the
    offending line number; a table with no data rows is an error because an
    empty extraction would write a vector file no dataset can use.
    """
    texts = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in ("variable", "question") if c not in fields]
        if missing:
            raise QuestionFileError(
                f"{path}: question table lacks column(s) {missing}; "
                f"found {fields}"
            )
        for line_no, row in enumerate(reader, start=2):
            variable = (row.get("variable") or "").strip()
            text = (row.get("question") or "").strip()
            if not variable:
                raise QuestionFileError(f"{path} line {line_no}: blank variable")
            if not text:
                raise EmptyQuestionError(
                    f"{path} line {line_no}: variable {variable!r} has no "
                    "question text"
                )
            if variable in texts:
                if texts[variable] != text:
                    logger.warning(
                        "%s line %d: variable %r repeats with different text; "
                        "keeping the first occurrence",
                        path,
                        line_no,
                        variable,
                    )
                continue
            texts[variable] = text
    if not texts:
        raise EmptyQuestionSetError(f"{path}: no questions to embed")
    return sorted(texts.items())
