"""Minimal WAV loading and resampling (PCM only, stdlib wave)."""

from __future__ import annotations

import wave

import numpy as np

from .errors import ExportError

_PCM_SCALE = {1: 128.0, 2: 32768.0, 4: 2147483648.0}
_PCM_DTYPE = {1: np.uint8, 2: "<i2", 4: "<i4"}


def read_wav(path) -> tuple[np.ndarray, int]:
    """Load a PCM WAV file as mono float32 in [-1, 1] plus its sample rate."""
    try:
        with wave.open(str(path), "rb") as f:
            width = f.getsampwidth()
            channels = f.getnchannels()
            rate = f.getframerate()
            frames = f.readframes(f.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise ExportError(f"{path}: unreadable audio: {exc}") from exc
    if width not in _PCM_DTYPE:
        raise ExportError(f"{path}: unsupported sample width {width} bytes")
    if channels < 1:
        raise ExportError(f"{path}: no channels")
    data = np.frombuffer(frames, dtype=_PCM_DTYPE[width]).astype(np.float64)
    if width == 1:
        data = data - 128.0
    if channels > 1:
        usable = (data.size // channels) * channels
        data = data[:usable].reshape(-1, channels).mean(axis=1)
    if data.size == 0:
        raise ExportError(f"{path}: empty audio")
    return (data / _PCM_SCALE[width]).astype(np.float32), rate


def resample_linear(waveform: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Linear-interpolation resampling; identity when rates match."""
    if rate_in == rate_out:
        return waveform
    if rate_in <= 0 or rate_out <= 0:
        raise ExportError(f"invalid sample rates {rate_in} -> {rate_out}")
    duration = waveform.size / rate_in
    n_out = max(1, int(round(duration * rate_out)))
    t_in = np.arange(waveform.size) / rate_in
    t_out = np.arange(n_out) / rate_out
    return np.interp(t_out, t_in, waveform.astype(np.float64)).astype(np.float32)
