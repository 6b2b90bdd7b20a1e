"""Fixtures: a tiny deterministic CTC model and small WAV files.

Model hubs are not reachable from the test environment, so compliance is
exercised against a locally constructed recognizer with the same runtime
interface.  Its blank (pad) token deliberately sits at a nonzero id to
exercise the column remap, and its output layer is biased toward the
blank so silence behaves like it does under real recognizers.
"""

from __future__ import annotations

import json
import wave
from pathlib import Path

import numpy as np
import pytest


def write_wav(path, samples: np.ndarray, rate: int, width: int = 2) -> None:
    scaled = np.clip(samples, -1.0, 1.0)
    if width == 2:
        data = (scaled * 32767).astype("<i2").tobytes()
    elif width == 4:
        data = (scaled * 2147483647).astype("<i4").tobytes()
    else:
        raise ValueError(width)
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(width)
        f.setframerate(rate)
        f.writeframes(data)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    import torch
    from transformers import (
        Wav2Vec2Config,
        Wav2Vec2CTCTokenizer,
        Wav2Vec2FeatureExtractor,
        Wav2Vec2ForCTC,
        Wav2Vec2Processor,
    )

    model_dir = tmp_path_factory.mktemp("tiny-ctc-model")
    vocab = {"a": 0, "b": 1, "<pad>": 2, "c": 3, "|": 4, "<unk>": 5}
    (model_dir / "vocab.json").write_text(json.dumps(vocab), encoding="utf-8")
    tokenizer = Wav2Vec2CTCTokenizer(
        str(model_dir / "vocab.json"),
        pad_token="<pad>",
        unk_token="<unk>",
        word_delimiter_token="|",
    )
    extractor = Wav2Vec2FeatureExtractor(
        feature_size=1,
        sampling_rate=16000,
        padding_value=0.0,
        do_normalize=True,
        return_attention_mask=False,
    )
    processor = Wav2Vec2Processor(feature_extractor=extractor, tokenizer=tokenizer)
    config = Wav2Vec2Config(
        vocab_size=6,
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=48,
        conv_dim=[16, 16],
        conv_stride=[5, 4],
        conv_kernel=[10, 3],
        num_feat_extract_layers=2,
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=4,
        pad_token_id=2,
    )
    torch.manual_seed(0)
    model = Wav2Vec2ForCTC(config)
    with torch.no_grad():
        model.lm_head.weight.mul_(0.05)
        model.lm_head.bias.zero_()
        model.lm_head.bias[2] = 4.0
    model.save_pretrained(model_dir)
    processor.save_pretrained(model_dir)
    return model_dir


@pytest.fixture
def audio_dir(tmp_path) -> Path:
    d = tmp_path / "audio"
    d.mkdir()
    rng = np.random.default_rng(0)
    write_wav(d / "silence.wav", np.zeros(16000), 16000)
    t = np.arange(8000) / 16000
    write_wav(d / "tone.wav", 0.5 * np.sin(2 * np.pi * 440 * t), 16000)
    write_wav(d / "noise8k.wav", 0.2 * rng.normal(size=4000), 8000)
    return d
