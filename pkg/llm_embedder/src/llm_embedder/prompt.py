"""Instruction-style prompt construction.

The wording below is an interchange contract with the consumer package:
question vectors are only comparable across runs and tools if every producer
sends byte-identical prompts to the model. A golden fixture captured from
the consumer's own prompt builder pins that agreement in the test suite, so
any drift in these constants fails the build instead of silently shifting
every embedding.
"""

from __future__ import annotations

from .errors import EmptyQuestionError

PROMPT_PREFIX = (
    "Below is an instruction that describes a task. "
    "Write a response that appropriately completes the request."
)
PROMPT_INFIX = "\n\n### Instruction:"
PROMPT_SUFFIX = "\n\n### Response:"


def build_prompt(question_text):
    """Wrap one question in the instruction template.

    Raises EmptyQuestionError for missing or whitespace-only text; an empty
    prompt would embed the template itself and poison the vector table.
    """
    if not question_text or not str(question_text).strip():
        raise EmptyQuestionError("cannot build a prompt for an empty question")
    return f"{PROMPT_PREFIX}{PROMPT_INFIX}{question_text}{PROMPT_SUFFIX}"
