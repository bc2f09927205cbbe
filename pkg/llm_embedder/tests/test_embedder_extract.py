"""Extraction behavior on the miniature fixture backbones.

The decoder fixture is 32 wide and the encoder 48 wide on purpose: any
confusion between the two styles, or between pooled and last-token
reductions, shows up as a dimension or mode error long before numerics are
compared.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pytest

from llm_embedder import (
    ConfigError,
    CorruptVectorError,
    EmptyQuestionError,
    EmptyQuestionSetError,
    ExtractionConfig,
    ModeMismatchError,
    ModelLoadError,
    OutOfMemoryError,
    QuestionFileError,
    extract_question_embeddings,
    read_question_table,
    write_interchange,
)

FIXTURES = Path(__file__).parent / "fixtures"
DECODER = str(FIXTURES / "tiny-decoder")
ENCODER = str(FIXTURES / "tiny-encoder")


@pytest.fixture(scope="module")
def fixture_questions():
    return read_question_table(str(FIXTURES / "questions.csv"))


def _cfg(tmp_path, name="vectors.json", **kwargs):
    settings = {"model": DECODER, "mode": "last-token", "batch_size": 2}
    settings.update(kwargs)
    return ExtractionConfig(out_path=str(tmp_path / name), **settings)


def test_decoder_output_loads_in_the_consumer(tmp_path, fixture_questions):
    result = extract_question_embeddings(fixture_questions, _cfg(tmp_path))
    assert result.dim == 32
    assert result.count == 3
    assert result.names == ["civ_duty", "gov_transit", "pol_emission"]

    from surveycast.embeddings import load_embeddings

    matrix = load_embeddings(result.manifest_path)
    assert matrix.count == 3
    assert matrix.dim == 32
    assert matrix.names == result.names
    assert matrix.extraction_mode == "last-token"
    assert np.array_equal(matrix.vectors, result.vectors)


def test_payload_holds_exactly_count_times_dim_float32(tmp_path, fixture_questions):
    result = extract_question_embeddings(fixture_questions, _cfg(tmp_path))
    blob = Path(result.payload_path).read_bytes()
    assert len(blob) == result.count * result.dim * 4
    manifest = json.loads(Path(result.manifest_path).read_text())
    assert manifest["payload_sha256"] == hashlib.sha256(blob).hexdigest()
    assert manifest["dtype"] == "float32-le"
    assert np.array_equal(
        np.frombuffer(blob, dtype="<f4").reshape(result.count, result.dim),
        result.vectors,
    )


def test_reruns_write_byte_identical_files(tmp_path, fixture_questions):
    first = extract_question_embeddings(
        fixture_questions, _cfg(tmp_path / "a", name="v.json")
    )
    second = extract_question_embeddings(
        fixture_questions, _cfg(tmp_path / "b", name="v.json")
    )
    assert (
        Path(first.payload_path).read_bytes() == Path(second.payload_path).read_bytes()
    )
    assert (
        Path(first.manifest_path).read_bytes()
        == Path(second.manifest_path).read_bytes()
    )


def test_identical_question_text_gives_identical_vectors(tmp_path):
    pairs = [
        ("first_copy", "Is voting a civic duty?"),
        ("second_copy", "Is voting a civic duty?"),
    ]
    result = extract_question_embeddings(pairs, _cfg(tmp_path))
    assert np.array_equal(result.vectors[0], result.vectors[1])


def test_batch_size_does_not_change_which_token_is_read(tmp_path, fixture_questions):
    # The three prompts have different lengths, so batching pads two of
    # them. Reading a padded position instead of the last real token would
    # shift those vectors wholesale, far beyond kernel-level float noise.
    one = extract_question_embeddings(
        fixture_questions, _cfg(tmp_path / "a", batch_size=1), write=False
    )
    batched = extract_question_embeddings(
        fixture_questions, _cfg(tmp_path / "b", batch_size=3), write=False
    )
    assert np.allclose(one.vectors, batched.vectors, rtol=0.0, atol=1e-5)


def test_encoder_pooled_output_loads_in_the_consumer(tmp_path, fixture_questions):
    cfg = _cfg(tmp_path, model=ENCODER, mode="pooled")
    result = extract_question_embeddings(fixture_questions, cfg)
    assert result.dim == 48
    assert result.count == 3

    from surveycast.embeddings import load_embeddings

    matrix = load_embeddings(result.manifest_path)
    assert matrix.dim == 48
    assert matrix.extraction_mode == "pooled"


def test_mode_must_suit_the_architecture(tmp_path, fixture_questions):
    with pytest.raises(ModeMismatchError, match="last-token"):
        extract_question_embeddings(
            fixture_questions, _cfg(tmp_path, model=DECODER, mode="pooled")
        )
    with pytest.raises(ModeMismatchError, match="pooled"):
        extract_question_embeddings(
            fixture_questions, _cfg(tmp_path, model=ENCODER, mode="last-token")
        )


def test_empty_question_set_is_refused(tmp_path):
    with pytest.raises(EmptyQuestionSetError):
        extract_question_embeddings([], _cfg(tmp_path))


def test_unloadable_model_raises_model_load_error(tmp_path, fixture_questions):
    empty = tmp_path / "not-a-model"
    empty.mkdir()
    with pytest.raises(ModelLoadError):
        extract_question_embeddings(
            fixture_questions, _cfg(tmp_path, model=str(empty))
        )


def test_out_of_memory_advice_names_the_batch_flag(
    tmp_path, fixture_questions, monkeypatch
):
    import transformers

    def exploding_forward(self, *args, **kwargs):
        raise RuntimeError("CUDA out of memory. Tried to allocate 1.00 GiB")

    monkeypatch.setattr(transformers.GPT2Model, "forward", exploding_forward)
    with pytest.raises(OutOfMemoryError, match="--batch-size"):
        extract_question_embeddings(fixture_questions, _cfg(tmp_path))


def test_config_validation_rejects_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        _cfg(tmp_path, mode="mean").validate()
    with pytest.raises(ConfigError):
        _cfg(tmp_path, batch_size=0).validate()
    with pytest.raises(ConfigError):
        _cfg(tmp_path, model="").validate()


def test_question_reader_sorts_dedupes_and_validates(tmp_path, caplog):
    path = tmp_path / "q.csv"
    path.write_text(
        "variable,question\n"
        "zeta,Last by name?\n"
        "alpha,First by name?\n"
        "zeta,Last by name?\n"
        "alpha,A different text?\n"
    )
    with caplog.at_level("WARNING", logger="llm_embedder.questions"):
        pairs = read_question_table(str(path))
    assert pairs == [("alpha", "First by name?"), ("zeta", "Last by name?")]
    assert any("alpha" in rec.getMessage() for rec in caplog.records)

    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("name,text\nq1,Why?\n")
    with pytest.raises(QuestionFileError, match="variable"):
        read_question_table(str(bad_header))

    header_only = tmp_path / "empty.csv"
    header_only.write_text("variable,question\n")
    with pytest.raises(EmptyQuestionSetError):
        read_question_table(str(header_only))

    blank_text = tmp_path / "blank.csv"
    blank_text.write_text("variable,question\nq1,   \n")
    with pytest.raises(EmptyQuestionError, match="q1"):
        read_question_table(str(blank_text))

    blank_variable = tmp_path / "novar.csv"
    blank_variable.write_text("variable,question\n,Why?\n")
    with pytest.raises(QuestionFileError, match="line 2"):
        read_question_table(str(blank_variable))


def test_interchange_writer_guards_its_inputs(tmp_path):
    out = str(tmp_path / "v.json")
    with pytest.raises(CorruptVectorError):
        write_interchange(["a"], np.array([[np.nan, 1.0]]), "m", "pooled", out)
    with pytest.raises(ConfigError):
        write_interchange(
            ["a", "a"], np.zeros((2, 2), dtype=np.float32), "m", "pooled", out
        )
    with pytest.raises(ConfigError):
        write_interchange(["a"], np.zeros(3, dtype=np.float32), "m", "pooled", out)
