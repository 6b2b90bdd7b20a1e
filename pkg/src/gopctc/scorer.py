"""Utterance scorer: standardize letter features, max-pool, linear softmax.

Training is plain mini-batch gradient descent (no optimizer state), so a
fixed seed reproduces the model bit for bit.  The best checkpoint is
chosen by development-set UAR after each epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import metrics, ordinal
from .errors import CompatibilityError, InputError
from .gop import GopFeatureSet

STD_FLOOR = 1e-6
NUM_CLASSES = 5


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    class_weights: np.ndarray | None = None
    class_weights_mode: str | None = None
    lr: float = 0.1
    epochs: int = 10
    batch_size: int = 64
    seed: int = 42
    loss: str = "ordinal"

    def __post_init__(self):
        if self.lr <= 0:
            raise InputError("learning rate must be positive")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InputError("batch size must be >= 1")
        if self.loss not in ordinal.LOSS_KINDS:
            raise InputError(f"unknown loss {self.loss!r}")
        if self.class_weights_mode is None:
            mode = "uniform" if self.class_weights is None else "custom"
            object.__setattr__(self, "class_weights_mode", mode)


@dataclass(frozen=True)
class ScorerModel:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    vocab_fingerprint: str = ""
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        mean = np.asarray(self.feature_mean, dtype=np.float64)
        std = np.asarray(self.feature_std, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        d = mean.shape[0]
        if std.shape != (d,) or w.shape != (NUM_CLASSES, d) or b.shape != (NUM_CLASSES,):
            raise InputError("inconsistent model parameter shapes")
        if np.any(std < STD_FLOOR):
            raise InputError(f"feature_std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_std", std)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def feature_dim(self) -> int:
        return self.feature_mean.shape[0]


@dataclass(frozen=True)
class Prediction:
    utt_id: str
    posterior: np.ndarray
    predicted_class: int


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    dev_uar: float | None


def _standardize(matrix: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (matrix - mean) / std


def pool_utterance(features: GopFeatureSet, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Z-score each letter row with the stored statistics, then take the
    elementwise max over the letter dimension."""
    matrix = features.feature_matrix()
    if matrix.shape[1] != mean.shape[0]:
        raise CompatibilityError(
            f"feature dim {matrix.shape[1]} does not match model dim {mean.shape[0]}"
        )
    return _standardize(matrix, mean, std).max(axis=0)


def _argmax_low(values: np.ndarray) -> int:
    # np.argmax returns the first maximum: ties resolve to the lowest class.
    return int(np.argmax(values)) + 1


def predict(model: ScorerModel, features: GopFeatureSet) -> Prediction:
    pooled = pool_utterance(features, model.feature_mean, model.feature_std)
    logits = model.weights @ pooled + model.bias
    posterior = ordinal.softmax(logits)
    return Prediction(
        utt_id=features.utt_id,
        posterior=posterior,
        predicted_class=_argmax_low(posterior),
    )


def predict_many(model: ScorerModel, feature_sets: Sequence[GopFeatureSet]) -> list[Prediction]:
    return [predict(model, fs) for fs in feature_sets]


def _check_example(fs: GopFeatureSet, label: int) -> int:
    label = int(label)
    if not 1 <= label <= NUM_CLASSES:
        raise InputError(f"score {label} outside 1..{NUM_CLASSES} for {fs.utt_id!r}")
    return label


def train_detailed(
    train_set: Sequence[tuple[GopFeatureSet, int]],
    dev_set: Sequence[tuple[GopFeatureSet, int]] | None,
    cfg: TrainConfig,
    vocab_fingerprint: str = "",
) -> tuple[ScorerModel, list[EpochStats]]:
    """Train and return (model, per-epoch stats)."""
    if not train_set:
        raise InputError("training set is empty")
    labels = [_check_example(fs, y) for fs, y in train_set]
    dims = {fs.feature_dim for fs, _ in train_set}
    if dev_set:
        dims |= {fs.feature_dim for fs, _ in dev_set}
    if len(dims) != 1:
        raise CompatibilityError(f"mixed feature dims {sorted(dims)}")
    dim = dims.pop()

    rows = np.vstack([fs.feature_matrix() for fs, _ in train_set])
    mean = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), STD_FLOOR)

    x = np.stack([pool_utterance(fs, mean, std) for fs, _ in train_set])
    y = np.array(labels)
    n = x.shape[0]

    loss_cfg = ordinal.OrdinalLossConfig(
        num_classes=NUM_CLASSES, alpha=cfg.alpha, class_weights=cfg.class_weights
    )

    weights = np.zeros((NUM_CLASSES, dim))
    bias = np.zeros(NUM_CLASSES)

    dev_x = dev_y = None
    if dev_set:
        dev_x = np.stack([pool_utterance(fs, mean, std) for fs, _ in dev_set])
        dev_y = [_check_example(fs, lab) for fs, lab in dev_set]

    def dev_uar() -> float:
        logits = dev_x @ weights.T + bias
        preds = [_argmax_low(row) for row in ordinal.softmax(logits)]
        return metrics.evaluate(dev_y, preds).uar

    rng = np.random.default_rng(cfg.seed)
    best = (weights.copy(), bias.copy())
    best_uar = -1.0
    stats: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = x[idx]
            logits = xb @ weights.T + bias
            mean_loss, grads = ordinal.batch_loss_grad(logits, y[idx], loss_cfg, kind=cfg.loss)
            loss_sum += mean_loss * idx.size
            scale = cfg.lr / idx.size
            weights -= scale * (grads.T @ xb)
            bias -= scale * grads.sum(axis=0)
        uar = None
        if dev_set:
            uar = dev_uar()
            if uar > best_uar:
                best_uar = uar
                best = (weights.copy(), bias.copy())
        stats.append(EpochStats(epoch=epoch + 1, mean_loss=loss_sum / n, dev_uar=uar))

    if not dev_set or cfg.epochs == 0:
        best = (weights, bias)

    model = ScorerModel(
        feature_mean=mean,
        feature_std=std,
        weights=best[0],
        bias=best[1],
        vocab_fingerprint=vocab_fingerprint,
        config={
            "alpha": cfg.alpha,
            "class_weights_mode": cfg.class_weights_mode,
            "class_weights": None
            if cfg.class_weights is None
            else np.asarray(cfg.class_weights, dtype=np.float64).tolist(),
            "lr": cfg.lr,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "loss": cfg.loss,
        },
    )
    return model, stats


def train(
    train_set: Sequence[tuple[GopFeatureSet, int]],
    dev_set: Sequence[tuple[GopFeatureSet, int]] | None,
    cfg: TrainConfig,
    vocab_fingerprint: str = "",
) -> ScorerModel:
    return train_detailed(train_set, dev_set, cfg, vocab_fingerprint)[0]


def _check_weights(weights, count: int) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (count,):
        raise InputError(f"need exactly {count} interpolation weights")
    if np.any(w < 0):
        raise InputError("interpolation weights must be nonnegative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise InputError(f"interpolation weights sum to {w.sum()!r}, expected 1")
    return w


def _common_ids(systems: Sequence[Mapping[str, np.ndarray]]) -> list[str]:
    if len(systems) < 2:
        raise InputError("interpolation needs at least two systems")
    ids = set(systems[0])
    for k, system in enumerate(systems[1:], start=2):
        if set(system) != ids:
            diff = sorted(ids.symmetric_difference(system))[:5]
            raise InputError(f"system {k} covers different utterances (e.g. {diff})")
    return sorted(ids)


def interpolate(
    systems: Sequence[Mapping[str, np.ndarray]], weights
) -> list[Prediction]:
    """Convex combination of per-system posteriors, one Prediction per id."""
    w = _check_weights(weights, len(systems))
    out = []
    for utt_id in _common_ids(systems):
        post = np.zeros(NUM_CLASSES)
        for wk, system in zip(w, systems):
            p = np.asarray(system[utt_id], dtype=np.float64)
            if p.shape != (NUM_CLASSES,):
                raise InputError(f"posterior for {utt_id!r} must have length {NUM_CLASSES}")
            post += wk * p
        out.append(
            Prediction(utt_id=utt_id, posterior=post, predicted_class=_argmax_low(post))
        )
    return out


def _simplex_grid(parts: int, total: int):
    """All nonnegative integer compositions of `total` into `parts`, in
    lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _simplex_grid(parts - 1, total - first):
            yield (first,) + rest


def optimize_interpolation(
    systems: Sequence[Mapping[str, np.ndarray]],
    ref_labels: Mapping[str, int],
    step: float = 0.1,
) -> np.ndarray:
    """Exhaustive simplex grid search maximizing UAR on the references.

    Ties break toward lower MAE, then the lexicographically smallest
    weight vector.
    """
    if not 0 < step <= 0.5:
        raise InputError("grid step must lie in (0, 0.5]")
    ids = _common_ids(systems)
    if set(ref_labels) != set(ids):
        raise InputError("reference labels must cover exactly the systems' utterances")
    refs = [int(ref_labels[u]) for u in ids]
    divisions = round(1.0 / step)
    if abs(divisions * step - 1.0) > 1e-9:
        raise InputError(f"grid step {step} must divide 1 evenly")

    # Pre-stack posteriors: (num_systems, num_utts, 5).
    stacked = np.stack(
        [np.stack([np.asarray(s[u], dtype=np.float64) for u in ids]) for s in systems]
    )
    best_w = None
    best_key = None
    for comp in _simplex_grid(len(systems), divisions):
        w = np.array(comp, dtype=np.float64) / divisions
        mixed = np.tensordot(w, stacked, axes=1)
        preds = [_argmax_low(row) for row in mixed]
        report = metrics.evaluate(refs, preds)
        key = (-report.uar, report.mae)
        if best_key is None or key < best_key:
            best_key = key
            best_w = w
    return best_w
