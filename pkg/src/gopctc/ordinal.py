"""Distance-weighted ordinal cross-entropy over class posteriors.

The per-sample loss is  sum_i w_y * (-log(1 - p_i)) * |y - i|**alpha
with the true-class term excluded for every alpha (the distance penalty
at i = y is defined as 0, including alpha = 0).  A plain weighted
cross-entropy mode is exposed separately for ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

# p_i is capped just below 1 so log1p(-p_i) stays finite near saturation.
PROB_CEILING = 1.0 - 1e-12
LOSS_KINDS = ("ordinal", "ce")


@dataclass(frozen=True)
class OrdinalLossConfig:
    num_classes: int = 5
    alpha: float = 0.5
    class_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise InputError("need at least two classes")
        if self.alpha < 0:
            raise InputError("alpha must be >= 0")
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=np.float64)
            if w.shape != (self.num_classes,):
                raise InputError(f"class_weights must have length {self.num_classes}")
            if np.any(w <= 0):
                raise InputError("class weights must be positive")
            object.__setattr__(self, "class_weights", w)

    def weight_of(self, y: int) -> float:
        if self.class_weights is None:
            return 1.0
        return float(self.class_weights[y - 1])


def _checked_posterior(probs, num_classes: int) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (num_classes,):
        raise InputError(f"posterior must have length {num_classes}")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
        raise InputError("posterior entries must be nonnegative and sum to 1")
    return p


def _checked_label(y: int, num_classes: int) -> int:
    y = int(y)
    if not 1 <= y <= num_classes:
        raise InputError(f"class label {y} outside 1..{num_classes}")
    return y


def _distance_penalties(num_classes: int, y: int, alpha: float) -> np.ndarray:
    d = np.abs(np.arange(1, num_classes + 1, dtype=np.float64) - y)
    pen = np.zeros(num_classes)
    nz = d > 0
    pen[nz] = d[nz] ** alpha
    return pen


def loss_value(probs, y: int, cfg: OrdinalLossConfig) -> float:
    """Ordinal loss of one posterior against true class y (1-based)."""
    p = _checked_posterior(probs, cfg.num_classes)
    y = _checked_label(y, cfg.num_classes)
    pen = _distance_penalties(cfg.num_classes, y, cfg.alpha)
    capped = np.minimum(p, PROB_CEILING)
    return float(cfg.weight_of(y) * np.sum(-np.log1p(-capped) * pen))


def ce_loss_value(probs, y: int, cfg: OrdinalLossConfig) -> float:
    """Plain weighted cross-entropy -w_y * log(p_y), the ablation mode."""
    p = _checked_posterior(probs, cfg.num_classes)
    y = _checked_label(y, cfg.num_classes)
    with np.errstate(divide="ignore"):
        return float(-cfg.weight_of(y) * np.log(p[y - 1]))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def batch_loss_grad(logits, labels, cfg: OrdinalLossConfig, kind: str = "ordinal"):
    """Mean loss over a batch plus per-sample gradients w.r.t. logits.

    ``logits`` is (B, N), ``labels`` a length-B sequence of 1-based
    classes.  Returns (mean_loss, grads) with grads of shape (B, N);
    divide by B to accumulate the gradient of the batch mean.
    """
    if kind not in LOSS_KINDS:
        raise InputError(f"unknown loss kind {kind!r}, expected one of {LOSS_KINDS}")
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    if not np.all(np.isfinite(z)):
        raise InputError("logits must be finite")
    if z.shape[1] != cfg.num_classes:
        raise InputError(f"logits must have {cfg.num_classes} columns")
    ys = [_checked_label(y, cfg.num_classes) for y in labels]
    if len(ys) != z.shape[0]:
        raise InputError("labels and logits row counts differ")
    p = softmax(z)
    weights = np.array([cfg.weight_of(y) for y in ys])

    if kind == "ce":
        onehot = np.zeros_like(p)
        onehot[np.arange(len(ys)), np.array(ys) - 1] = 1.0
        with np.errstate(divide="ignore"):
            losses = -weights * np.log(np.maximum(p[np.arange(len(ys)), np.array(ys) - 1], 1e-300))
        grads = weights[:, None] * (p - onehot)
    else:
        pen = np.stack([_distance_penalties(cfg.num_classes, y, cfg.alpha) for y in ys])
        capped = np.minimum(p, PROB_CEILING)
        losses = weights * np.sum(-np.log1p(-capped) * pen, axis=1)
        g = weights[:, None] * pen / (1.0 - capped)
        grads = p * (g - np.sum(g * p, axis=1, keepdims=True))
    return float(losses.mean()), grads


def loss_grad_logits(logits, y: int, cfg: OrdinalLossConfig, kind: str = "ordinal") -> np.ndarray:
    """Analytic gradient of the single-sample loss w.r.t. the logits."""
    _, grads = batch_loss_grad(np.atleast_2d(logits), [y], cfg, kind=kind)
    return grads[0]


def balanced_class_weights(label_counts) -> np.ndarray:
    """Weights inversely proportional to class frequencies.

    w_y = total / (N * count_y); classes with zero count receive the
    maximum computed weight.
    """
    counts = np.asarray(label_counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 1:
        raise InputError("label_counts must be a non-empty 1-D sequence")
    if np.any(counts < 0):
        raise InputError("label counts must be nonnegative")
    total = int(counts.sum())
    if total == 0:
        raise InputError("at least one class must have a nonzero count")
    n = counts.size
    weights = np.zeros(n)
    nz = counts > 0
    weights[nz] = total / (n * counts[nz].astype(np.float64))
    weights[~nz] = weights[nz].max()
    return weights
