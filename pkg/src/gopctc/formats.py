"""Readers and writers for all on-disk artifacts.

Byte layouts are documented in FORMATS.md.  Every reader returns a
structured error (never an uncaught crash) on malformed input, and every
writer/reader pair round-trips losslessly: emissions at f32 storage
precision, features and models at f64.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import EmbeddingSet
from .ctc import EmissionMatrix, Vocab, validate_emissions, logsumexp
from .errors import FormatError, InputError, VocabularyError
from .gop import GopFeatureSet
from .metrics import MetricsReport
from .scorer import NUM_CLASSES, Prediction, ScorerModel

EMISSIONS_MAGIC = b"GOPE"
FEATURES_MAGIC = b"GOPF"
EMBEDDINGS_MAGIC = b"GOPV"
FORMAT_VERSION = 1

BLANK_TOKEN = "<blank>"

MANIFEST_HEADER = ["utt_id", "word", "score", "emission_path"]
PREDICTIONS_HEADER = ["utt_id", "p1", "p2", "p3", "p4", "p5", "pred"]
CLUSTERS_HEADER = ["utt_id", "cluster"]


class _ByteReader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.path}: truncated at byte {self.pos} (needed {n} more bytes)"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def expect_magic(self, magic: bytes) -> None:
        got = self.take(len(magic))
        if got != magic:
            raise FormatError(f"{self.path}: bad magic {got!r}, expected {magic!r}")

    def expect_version(self, version: int) -> None:
        got = self.u32()
        if got != version:
            raise FormatError(f"{self.path}: unsupported version {got}, expected {version}")

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.pos} unexpected trailing bytes"
            )


def _check_plain_field(value: str, what: str) -> str:
    if "," in value or "\n" in value or "\r" in value:
        raise InputError(f"{what} {value!r} must not contain commas or newlines")
    return value


# ---------------------------------------------------------------------------
# Emissions (GOPE)

def write_emissions(path, values) -> None:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
        raise InputError("emissions must be (T >= 1) x (C >= 2)")
    t, c = v.shape
    with open(path, "wb") as f:
        f.write(EMISSIONS_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, t, c))
        f.write(v.astype("<f4").tobytes())


def read_emissions(path, apply_log_softmax: bool = False) -> EmissionMatrix:
    """Parse a GOPE file into a validated double-precision EmissionMatrix."""
    data = Path(path).read_bytes()
    r = _ByteReader(data, str(path))
    r.expect_magic(EMISSIONS_MAGIC)
    r.expect_version(FORMAT_VERSION)
    t = r.u32()
    c = r.u32()
    if t < 1 or c < 2:
        raise FormatError(f"{path}: invalid dimensions T={t}, C={c}")
    raw = r.take(4 * t * c)
    r.expect_end()
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(t, c)
    if apply_log_softmax:
        values = values - np.atleast_1d(logsumexp(values, axis=1))[:, None]
    validate_emissions(values)
    return EmissionMatrix(values=values)


# ---------------------------------------------------------------------------
# Vocabulary

def write_vocab(path, vocab: Vocab) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for token in vocab.tokens:
            f.write(token + "\n")


def read_vocab(path) -> Vocab:
    """One token per line; line 0 must be the literal ``<blank>``."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty vocabulary file")
    if lines[0] != BLANK_TOKEN:
        raise FormatError(f"{path}: first token must be {BLANK_TOKEN!r}, got {lines[0]!r}")
    seen = set()
    for i, token in enumerate(lines):
        if not token:
            raise FormatError(f"{path}: empty token on line {i + 1}")
        if token in seen:
            raise FormatError(f"{path}: duplicate token {token!r} on line {i + 1}")
        seen.add(token)
    try:
        return Vocab(tokens=tuple(lines))
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def vocab_fingerprint(vocab: Vocab) -> str:
    return hashlib.sha256("\n".join(vocab.tokens).encode("utf-8")).hexdigest()


def word_to_labels(word: str, vocab: Vocab) -> list[int]:
    """Lowercase the word and map each character to its letter index."""
    if not word:
        raise InputError("word must be non-empty")
    index = {letter: i + 1 for i, letter in enumerate(vocab.letters)}
    labels = []
    for ch in word.lower():
        if ch not in index:
            raise VocabularyError(f"character {ch!r} of word {word!r} is not in the vocabulary")
        labels.append(index[ch])
    return labels


# ---------------------------------------------------------------------------
# Manifest

@dataclass(frozen=True)
class ManifestRow:
    utt_id: str
    word: str
    score: int | None
    emission_path: str


def write_manifest(path, rows: Sequence[ManifestRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            _check_plain_field(row.utt_id, "utt_id")
            _check_plain_field(row.word, "word")
            _check_plain_field(row.emission_path, "emission_path")
            score = "" if row.score is None else str(int(row.score))
            writer.writerow([row.utt_id, row.word, score, row.emission_path])


def read_manifest(path, require_scores: bool = False) -> list[ManifestRow]:
    rows: list[ManifestRow] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise FormatError(f"{path}: bad header {header!r}, expected {MANIFEST_HEADER!r}")
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            utt_id, word, score_text, emission_path = fields
            if not utt_id or not word or not emission_path:
                raise FormatError(f"{path}:{lineno}: utt_id, word and emission_path are required")
            if utt_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
            seen.add(utt_id)
            if score_text == "":
                if require_scores:
                    raise FormatError(f"{path}:{lineno}: missing score for {utt_id!r}")
                score = None
            else:
                try:
                    score = int(score_text)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: score {score_text!r} is not an integer")
                if not 1 <= score <= 5:
                    raise FormatError(f"{path}:{lineno}: score {score} outside 1..5")
            rows.append(ManifestRow(utt_id, word, score, emission_path))
    return rows


# ---------------------------------------------------------------------------
# Feature files (GOPF)

@dataclass(frozen=True)
class FeatureFile:
    num_letters: int
    clamp: float
    vocab_fingerprint: str
    feature_sets: tuple[GopFeatureSet, ...]


def write_features(
    path,
    feature_sets: Sequence[GopFeatureSet],
    fingerprint: str = "",
) -> None:
    """Write feature sets sorted by utt_id (parallel extraction order must
    not leak into the bytes)."""
    sets = sorted(feature_sets, key=lambda fs: fs.utt_id)
    if not sets:
        raise InputError("refusing to write an empty feature file")
    num_letters = sets[0].num_letters
    clamp = sets[0].clamp
    for fs in sets:
        if fs.num_letters != num_letters or fs.clamp != clamp:
            raise InputError("feature sets disagree on letter count or clamp")
    fp_bytes = fingerprint.encode("utf-8")
    with open(path, "wb") as f:
        f.write(FEATURES_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, num_letters))
        f.write(struct.pack("<d", clamp))
        f.write(struct.pack("<I", len(sets)))
        f.write(struct.pack("<I", len(fp_bytes)))
        f.write(fp_bytes)
        for fs in sets:
            uid = fs.utt_id.encode("utf-8")
            f.write(struct.pack("<I", len(uid)))
            f.write(uid)
            f.write(struct.pack("<I", fs.seq_len))
            f.write(struct.pack("<d", fs.lpp))
            f.write(fs.lpr_sub.astype("<f8").tobytes())
            f.write(fs.lpr_del.astype("<f8").tobytes())
            f.write(fs.letter_onehot.astype("<f8").tobytes())


def read_features(path) -> FeatureFile:
    data = Path(path).read_bytes()
    r = _ByteReader(data, str(path))
    r.expect_magic(FEATURES_MAGIC)
    r.expect_version(FORMAT_VERSION)
    num_letters = r.u32()
    clamp = r.f64()
    count = r.u32()
    fp_len = r.u32()
    try:
        fingerprint = r.take(fp_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: fingerprint is not valid UTF-8") from exc
    if num_letters < 1:
        raise FormatError(f"{path}: invalid letter count {num_letters}")
    sets = []
    for _ in range(count):
        uid_len = r.u32()
        try:
            utt_id = r.take(uid_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: utt_id is not valid UTF-8") from exc
        s = r.u32()
        if s < 1:
            raise FormatError(f"{path}: record {utt_id!r} has no letters")
        lpp = r.f64()
        sub = np.frombuffer(r.take(8 * s * num_letters), dtype="<f8").reshape(s, num_letters)
        dele = np.frombuffer(r.take(8 * s), dtype="<f8").copy()
        onehot = np.frombuffer(r.take(8 * s * num_letters), dtype="<f8").reshape(s, num_letters)
        sets.append(
            GopFeatureSet(
                utt_id=utt_id,
                lpp=lpp,
                lpr_sub=sub.copy(),
                lpr_del=dele,
                letter_onehot=onehot.copy(),
                clamp=clamp,
            )
        )
    r.expect_end()
    return FeatureFile(
        num_letters=num_letters,
        clamp=clamp,
        vocab_fingerprint=fingerprint,
        feature_sets=tuple(sets),
    )


# ---------------------------------------------------------------------------
# Predictions CSV

def write_predictions(path, predictions: Sequence[Prediction]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for pred in sorted(predictions, key=lambda p: p.utt_id):
            _check_plain_field(pred.utt_id, "utt_id")
            writer.writerow(
                [pred.utt_id]
                + [repr(float(x)) for x in pred.posterior]
                + [str(int(pred.predicted_class))]
            )


def read_predictions(path) -> list[Prediction]:
    out: list[Prediction] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != PREDICTIONS_HEADER:
            raise FormatError(f"{path}: bad header {header!r}, expected {PREDICTIONS_HEADER!r}")
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 7:
                raise FormatError(f"{path}:{lineno}: expected 7 fields, got {len(fields)}")
            try:
                posterior = np.array([float(x) for x in fields[1:6]])
                pred_class = int(fields[6])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= pred_class <= NUM_CLASSES:
                raise FormatError(f"{path}:{lineno}: pred {pred_class} outside 1..5")
            out.append(
                Prediction(utt_id=fields[0], posterior=posterior, predicted_class=pred_class)
            )
    return out


# ---------------------------------------------------------------------------
# Scorer model document (JSON)

MODEL_KIND = "gopctc-scorer"


def write_model(path, model: ScorerModel) -> None:
    doc = {
        "kind": MODEL_KIND,
        "version": FORMAT_VERSION,
        "feature_dim": model.feature_dim,
        "vocab_fingerprint": model.vocab_fingerprint,
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "config": model.config,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_model(path) -> ScorerModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not a valid model document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != MODEL_KIND:
        raise FormatError(f"{path}: not a {MODEL_KIND} document")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    try:
        model = ScorerModel(
            feature_mean=np.array(doc["feature_mean"], dtype=np.float64),
            feature_std=np.array(doc["feature_std"], dtype=np.float64),
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=np.array(doc["bias"], dtype=np.float64),
            vocab_fingerprint=str(doc.get("vocab_fingerprint", "")),
            config=dict(doc.get("config", {})),
        )
    except (KeyError, TypeError, ValueError, InputError) as exc:
        raise FormatError(f"{path}: malformed model document: {exc}") from exc
    if model.feature_dim != doc.get("feature_dim"):
        raise FormatError(f"{path}: feature_dim does not match the stored arrays")
    return model


# ---------------------------------------------------------------------------
# Metrics report document (JSON)

REPORT_KIND = "gopctc-report"


def write_report(path, report: MetricsReport) -> None:
    doc = {"kind": REPORT_KIND, "version": FORMAT_VERSION}
    doc.update(report.to_dict())
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def read_report(path) -> MetricsReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not a valid report document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != REPORT_KIND:
        raise FormatError(f"{path}: not a {REPORT_KIND} document")
    try:
        return MetricsReport.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed report document: {exc}") from exc


# ---------------------------------------------------------------------------
# Embeddings (GOPV) and cluster assignments

def write_embeddings(path, embeddings: EmbeddingSet) -> None:
    with open(path, "wb") as f:
        f.write(EMBEDDINGS_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, embeddings.count, embeddings.dim))
        f.write(embeddings.vectors.astype("<f4").tobytes())
        for utt_id in embeddings.ids:
            if "\n" in utt_id:
                raise InputError(f"utt_id {utt_id!r} must not contain newlines")
            f.write(utt_id.encode("utf-8") + b"\n")


def read_embeddings(path) -> EmbeddingSet:
    data = Path(path).read_bytes()
    r = _ByteReader(data, str(path))
    r.expect_magic(EMBEDDINGS_MAGIC)
    r.expect_version(FORMAT_VERSION)
    n = r.u32()
    d = r.u32()
    if n < 2 or d < 1:
        raise FormatError(f"{path}: invalid dimensions N={n}, d={d}")
    vectors = np.frombuffer(r.take(4 * n * d), dtype="<f4").astype(np.float64).reshape(n, d)
    rest = r.take(len(r.data) - r.pos)
    if not rest.endswith(b"\n"):
        raise FormatError(f"{path}: id block must end with a newline")
    parts = rest[:-1].split(b"\n")
    if len(parts) != n:
        raise FormatError(f"{path}: expected {n} ids, found {len(parts)}")
    try:
        ids = tuple(p.decode("utf-8") for p in parts)
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: ids are not valid UTF-8") from exc
    try:
        return EmbeddingSet(ids=ids, vectors=vectors)
    except InputError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_clusters(path, ids: Sequence[str], labels: Sequence[int]) -> None:
    if len(ids) != len(labels):
        raise InputError("ids and labels differ in length")
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CLUSTERS_HEADER)
        for utt_id, label in zip(ids, labels):
            _check_plain_field(utt_id, "utt_id")
            writer.writerow([utt_id, str(int(label))])


def read_clusters(path) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CLUSTERS_HEADER:
            raise FormatError(f"{path}: bad header {header!r}, expected {CLUSTERS_HEADER!r}")
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
            try:
                out.append((fields[0], int(fields[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out
