"""Run a pretrained CTC letter recognizer over audio and write GOPE files.

The model's letter inventory passes through verbatim; only the blank
(the tokenizer's pad token) is remapped to emission column 0, which is
the downstream toolkit's fixed convention.  Output files are written
with the gopctc format writers, so compliance with the consumer's byte
layout is by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gopctc import formats
from gopctc.ctc import Vocab

from .audio import read_wav, resample_linear
from .errors import ExportError

BLANK_TOKEN = "<blank>"
PLACEHOLDER_WORD = "?"


@dataclass(frozen=True)
class ExportJob:
    utterances: tuple[tuple[str, Path], ...]
    model_id: str
    out_dir: Path


def vocab_and_order(tokenizer, num_classes: int) -> tuple[Vocab, list[int]]:
    """Blank-first vocabulary plus the emission column order.

    Columns are reordered to [pad/blank, then all other ids ascending].
    Only ids the emission head covers (< num_classes) take part: added
    tokens beyond the head (e.g. bos/eos appended by tokenizers) never
    appear in emissions.  Non-blank tokens pass through verbatim.
    """
    blank_id = tokenizer.pad_token_id
    if blank_id is None:
        raise ExportError("model tokenizer has no pad (blank) token")
    blank_id = int(blank_id)
    inventory = tokenizer.get_vocab()
    by_id = {int(idx): token for token, idx in inventory.items() if int(idx) < num_classes}
    if len(by_id) != num_classes:
        missing = sorted(set(range(num_classes)) - set(by_id))
        raise ExportError(f"model vocabulary does not cover emission ids {missing}")
    if blank_id not in by_id:
        raise ExportError(f"pad token id {blank_id} is outside the emission head")
    order = [blank_id] + sorted(i for i in by_id if i != blank_id)
    letters = [by_id[i] for i in order[1:]]
    for token in letters:
        if token == BLANK_TOKEN:
            raise ExportError(
                f"model vocabulary contains the literal token {BLANK_TOKEN!r}, "
                "which collides with the blank convention"
            )
        if not token:
            raise ExportError("model vocabulary contains an empty token")
    return Vocab(tokens=(BLANK_TOKEN, *letters)), order


def load_model(model_id: str):
    """Resolve a CTC model and processor from a hub id or local path."""
    try:
        import torch  # noqa: F401
        from transformers import AutoModelForCTC, AutoProcessor
    except ImportError as exc:
        raise ExportError(f"missing model runtime: {exc}") from exc
    try:
        processor = AutoProcessor.from_pretrained(model_id)
        model = AutoModelForCTC.from_pretrained(model_id)
    except Exception as exc:
        raise ExportError(f"cannot load model {model_id!r}: {exc}") from exc
    model.eval()
    return processor, model


def emission_log_probs(processor, model, waveform: np.ndarray, rate: int) -> np.ndarray:
    """Per-frame log-softmax over the model's raw column order, shape (T, C)."""
    import torch

    target_rate = processor.feature_extractor.sampling_rate
    waveform = resample_linear(waveform, rate, target_rate)
    inputs = processor(waveform, sampling_rate=target_rate, return_tensors="pt")
    with torch.no_grad():
        logits = model(inputs.input_values).logits
    if logits.ndim != 3 or logits.shape[0] != 1:
        raise ExportError(f"unexpected logits shape {tuple(logits.shape)}")
    return torch.log_softmax(logits[0], dim=-1).cpu().numpy().astype(np.float64)


def export(job: ExportJob, progress=None) -> list[formats.ManifestRow]:
    """Write one GOPE file per utterance plus vocab.txt and a manifest
    skeleton (placeholder words, empty scores) into the output directory."""
    if not job.utterances:
        raise ExportError("no audio files to export")
    processor, model = load_model(job.model_id)
    vocab, order = vocab_and_order(processor.tokenizer, int(model.config.vocab_size))

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_vocab(out_dir / "vocab.txt", vocab)

    rows = []
    for utt_id, audio_path in sorted(job.utterances):
        waveform, rate = read_wav(audio_path)
        log_probs = emission_log_probs(processor, model, waveform, rate)
        if log_probs.shape[1] != len(order):
            raise ExportError(
                f"{utt_id}: model emitted {log_probs.shape[1]} classes but the "
                f"vocabulary has {len(order)}"
            )
        emission_name = f"{utt_id}.gope"
        formats.write_emissions(out_dir / emission_name, log_probs[:, order])
        rows.append(formats.ManifestRow(utt_id, PLACEHOLDER_WORD, None, emission_name))
        if progress is not None:
            progress(utt_id)
    formats.write_manifest(out_dir / "manifest.csv", rows)
    return rows
