"""Shared test helpers: random emissions, synthetic feature sets, toy data."""

from __future__ import annotations

import numpy as np
import pytest

from gopctc import formats
from gopctc.ctc import Vocab, logsumexp
from gopctc.gop import GopFeatureSet


def random_emissions(rng: np.random.Generator, num_frames: int, num_classes: int) -> np.ndarray:
    """Row-normalized random log-probabilities."""
    raw = rng.normal(size=(num_frames, num_classes))
    return raw - np.atleast_1d(logsumexp(raw, axis=1))[:, None]


def peaked_emissions() -> np.ndarray:
    """Two frames over (blank, a, b) with probabilities (0.1, 0.8, 0.1)."""
    return np.log(np.array([[0.1, 0.8, 0.1], [0.1, 0.8, 0.1]]))


def uniform_emissions() -> np.ndarray:
    """Two frames over (blank, a, b), all probabilities 1/3."""
    return np.log(np.full((2, 3), 1.0 / 3.0))


NUM_SYNTH_LETTERS = 4
SYNTH_CLAMP = 50.0


def make_feature_set(
    utt_id: str,
    lpp: float,
    sub_rows: np.ndarray,
    del_values: np.ndarray,
    letters: list[int],
) -> GopFeatureSet:
    """Synthetic feature set honoring the structural invariants (clamped
    values, self-substitution zero, one-hot letter rows)."""
    sub = np.clip(np.atleast_2d(sub_rows).astype(float), -SYNTH_CLAMP, SYNTH_CLAMP)
    s, v = sub.shape
    idx = np.array(letters) - 1
    sub[np.arange(s), idx] = 0.0
    onehot = np.zeros((s, v))
    onehot[np.arange(s), idx] = 1.0
    return GopFeatureSet(
        utt_id=utt_id,
        lpp=float(np.clip(lpp, -SYNTH_CLAMP, SYNTH_CLAMP)),
        lpr_sub=sub,
        lpr_del=np.clip(np.atleast_1d(del_values).astype(float), -SYNTH_CLAMP, SYNTH_CLAMP),
        letter_onehot=onehot,
        clamp=SYNTH_CLAMP,
    )


def separable_blobs(seed: int, n_per_class: int, prefix: str = "u", radius: float = 8.0,
                    sigma: float = 0.2) -> list[tuple[GopFeatureSet, int]]:
    """Five well-separated Gaussian clusters, one per score class.

    The class signal lives in the (lpp, lpr_del) plane so the
    self-substitution-zero invariant cannot erase it.
    """
    rng = np.random.default_rng(seed)
    data = []
    i = 0
    for label in range(1, 6):
        angle = 2 * np.pi * (label - 1) / 5
        center = radius * np.array([np.cos(angle), np.sin(angle)])
        for _ in range(n_per_class):
            lpp = center[0] + sigma * rng.normal()
            dele = center[1] + sigma * rng.normal()
            sub = sigma * rng.normal(size=NUM_SYNTH_LETTERS)
            letter = int(rng.integers(1, NUM_SYNTH_LETTERS + 1))
            data.append((make_feature_set(f"{prefix}{i:04d}", lpp, sub, [dele], [letter]), label))
            i += 1
    return data


def ordinal_blobs(seed: int, n_per_class: int, prefix: str = "o", spacing: float = 1.2,
                  sigma: float = 1.0) -> list[tuple[GopFeatureSet, int]]:
    """Overlapping clusters along an ordinal line: adjacent classes are
    confusable, distant ones rarely are."""
    rng = np.random.default_rng(seed)
    direction = np.array([0.8, 0.6])
    data = []
    i = 0
    for label in range(1, 6):
        center = spacing * label * direction
        for _ in range(n_per_class):
            lpp = center[0] + sigma * rng.normal()
            dele = center[1] + sigma * rng.normal()
            sub = sigma * rng.normal(size=NUM_SYNTH_LETTERS)
            letter = int(rng.integers(1, NUM_SYNTH_LETTERS + 1))
            data.append((make_feature_set(f"{prefix}{i:04d}", lpp, sub, [dele], [letter]), label))
            i += 1
    return data


@pytest.fixture
def toy_dataset(tmp_path):
    """Small on-disk dataset: vocab, three 2-frame emission files, manifest."""
    vocab = Vocab(tokens=("<blank>", "a", "b"))
    formats.write_vocab(tmp_path / "vocab.txt", vocab)
    formats.write_emissions(tmp_path / "peak.gope", peaked_emissions())
    formats.write_emissions(tmp_path / "uni.gope", uniform_emissions())
    formats.write_emissions(
        tmp_path / "wide.gope",
        random_emissions(np.random.default_rng(123), 2, 3),
    )
    rows = [
        formats.ManifestRow("utt-a", "a", 5, "peak.gope"),
        formats.ManifestRow("utt-ab", "ab", 3, "uni.gope"),
        formats.ManifestRow("utt-bab", "bab", 1, "wide.gope"),
    ]
    formats.write_manifest(tmp_path / "manifest.csv", rows)
    return tmp_path
