"""Hidden-state extraction from pretrained language models.

Each question is wrapped in the instruction prompt, run through a frozen
model in inference mode (gradients off, dropout off), and reduced to a
single vector. Decoder-style models read left to right, so only the hidden
state at the last prompt token has seen the whole question; encoder-style
models see the whole prompt at every position, so their sentence summary is
the pooling head's output (or a mask-weighted token mean when the model has
no pooling head). Asking for the wrong reduction is refused rather than
silently honored, because a decoder's pooled mean and an encoder's last
token are both poor sentence summaries.

Batches are padded on the right and the last real token is located through
the attention mask, so batch composition never changes which position is
read. Vectors are computed in float32 and stored at 32-bit precision;
rerunning the same configuration on the same machine reproduces the output
byte for byte.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .errors import (
    ConfigError,
    EmptyQuestionSetError,
    ModeMismatchError,
    ModelLoadError,
    OutOfMemoryError,
)
from .interchange import write_interchange
from .prompt import build_prompt

logger = logging.getLogger(__name__)

EXTRACTION_MODES = ("last-token", "pooled")


@dataclass(frozen=True)
class ExtractionConfig:
    """Everything one extraction run needs.

    ``model`` is a local directory or hub identifier; ``mode`` must suit the
    architecture (last-token for decoder-style, pooled for encoder-style);
    ``device`` is a torch device hint; ``out_path`` is the manifest path and
    the payload lands next to it.
    """

    model: str
    mode: str = "last-token"
    device: str = "cpu"
    batch_size: int = 8
    out_path: str = "embeddings.json"

    def validate(self):
        if not self.model:
            raise ConfigError("model identifier must not be empty")
        if self.mode not in EXTRACTION_MODES:
            raise ConfigError(
                f"mode must be one of {EXTRACTION_MODES}, got {self.mode!r}"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if not self.out_path:
            raise ConfigError("out_path must not be empty")
        return self


@dataclass(frozen=True)
class ExtractionResult:
    """Vectors plus where they were written."""

    names: list
    vectors: np.ndarray
    manifest_path: str
    payload_path: str

    @property
    def dim(self):
        return int(self.vectors.shape[1])

    @property
    def count(self):
        return int(self.vectors.shape[0])


def _architecture_style(config):
    """Classify a model config as decoder- or encoder-style.

    Families registered for masked language modelling are encoder-style;
    families registered only for causal language modelling are decoder-style.
    An explicit ``is_decoder`` flag wins, and unknown families return None so
    the caller can trust the requested mode with a warning instead of
    refusing to run.
    """
    if getattr(config, "is_encoder_decoder", False):
        raise ModeMismatchError(
            "encoder-decoder models are not supported; use a plain encoder "
            "or decoder backbone"
        )
    if getattr(config, "is_decoder", False):
        return "decoder"
    try:
        from transformers.models.auto.modeling_auto import (
            MODEL_FOR_CAUSAL_LM_MAPPING_NAMES,
            MODEL_FOR_MASKED_LM_MAPPING_NAMES,
        )
    except ImportError:  # pragma: no cover - transformers layout change
        return None
    model_type = getattr(config, "model_type", None)
    if model_type in MODEL_FOR_MASKED_LM_MAPPING_NAMES:
        return "encoder"
    if model_type in MODEL_FOR_CAUSAL_LM_MAPPING_NAMES:
        return "decoder"
    return None


def _check_mode(style, mode, model_name):
    if style == "decoder" and mode != "last-token":
        raise ModeMismatchError(
            f"{model_name} is decoder-style; only the last prompt token has "
            "seen the whole question, use --mode last-token"
        )
    if style == "encoder" and mode != "pooled":
        raise ModeMismatchError(
            f"{model_name} is encoder-style; its sentence summary is the "
            "pooled output, use --mode pooled"
        )
    if style is None:
        logger.warning(
            "could not classify %s as encoder- or decoder-style; trusting "
            "mode %r",
            model_name,
            mode,
        )


def load_backbone(cfg):
    """Load model and tokenizer, ready for batched inference.

    Returns ``(model, tokenizer)`` with the model on the requested device in
    eval mode and the tokenizer set up for right padding. The architecture
    style invariant is enforced here, before any forward pass runs.
    """
    from transformers import AutoModel, AutoTokenizer

    try:
        model = AutoModel.from_pretrained(cfg.model, dtype=torch.float32)
        tokenizer = AutoTokenizer.from_pretrained(cfg.model)
    except (OSError, ValueError, KeyError) as exc:
        raise ModelLoadError(f"cannot load model {cfg.model!r}: {exc}") from None
    _check_mode(_architecture_style(model.config), cfg.mode, cfg.model)
    try:
        device = torch.device(cfg.device)
        model.to(device)
    except (RuntimeError, ValueError) as exc:
        raise ConfigError(f"cannot use device {cfg.device!r}: {exc}") from None
    model.eval()
    if tokenizer.pad_token is None:
        fallback = tokenizer.eos_token or tokenizer.unk_token
        if fallback is None:
            raise ModelLoadError(
                f"tokenizer for {cfg.model!r} has no pad, eos, or unk token "
                "to pad batches with"
            )
        tokenizer.pad_token = fallback
    tokenizer.padding_side = "right"
    return model, tokenizer


def _reduce(output, attention_mask, mode):
    """Collapse one batch of hidden states to one vector per prompt."""
    if mode == "last-token":
        hidden = output.last_hidden_state
        last = attention_mask.sum(dim=1) - 1
        rows = torch.arange(hidden.shape[0], device=hidden.device)
        return hidden[rows, last]
    pooled = getattr(output, "pooler_output", None)
    if pooled is not None:
        return pooled
    hidden = output.last_hidden_state
    mask = attention_mask.to(hidden.dtype).unsqueeze(-1)
    return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)


def extract_question_embeddings(questions, cfg, write=True):
    """Embed every question and write the interchange files.

    ``questions`` is a sequence of ``(variable, text)`` pairs; the output
    rows keep that order, which the question reader has already put in the
    consumer's dense question order. With ``write`` false the vectors are
    returned without touching disk.
    """
    cfg.validate()
    questions = list(questions)
    if not questions:
        raise EmptyQuestionSetError("no questions to embed")
    names = [variable for variable, _ in questions]
    prompts = [build_prompt(text) for _, text in questions]
    model, tokenizer = load_backbone(cfg)
    device = next(model.parameters()).device
    limit = getattr(model.config, "max_position_embeddings", None)
    chunks = []
    with torch.inference_mode():
        for start in range(0, len(prompts), cfg.batch_size):
            batch = prompts[start : start + cfg.batch_size]
            encoded = tokenizer(
                batch,
                return_tensors="pt",
                padding=True,
                truncation=limit is not None,
                max_length=limit,
            )
            input_ids = encoded["input_ids"].to(device)
            attention_mask = encoded["attention_mask"].to(device)
            try:
                output = model(input_ids=input_ids, attention_mask=attention_mask)
            except (RuntimeError, MemoryError) as exc:
                if isinstance(exc, MemoryError) or "out of memory" in str(exc).lower():
                    raise OutOfMemoryError(
                        f"a batch of {len(batch)} prompts did not fit in "
                        "memory; retry with a smaller --batch-size"
                    ) from None
                raise
            rows = _reduce(output, attention_mask, cfg.mode)
            chunks.append(rows.cpu().numpy().astype(np.float32))
    vectors = np.vstack(chunks)
    manifest_path = payload_path = ""
    if write:
        manifest_path, payload_path = write_interchange(
            names, vectors, cfg.model, cfg.mode, cfg.out_path
        )
        logger.info(
            "wrote %d vectors of dim %d to %s",
            vectors.shape[0],
            vectors.shape[1],
            manifest_path,
        )
    return ExtractionResult(names, vectors, manifest_path, payload_path)
