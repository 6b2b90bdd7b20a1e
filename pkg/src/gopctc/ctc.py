"""Log-space CTC marginal likelihood over frame-level emissions.

The forward/backward recursions run over the blank-interleaved extended
label sequence.  All arithmetic stays in log space; impossible states are
a genuine ``-inf``, never a large negative sentinel, so ``logaddexp``
behaves correctly.  Trellis math is double precision regardless of how
the emissions were stored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, SizeError

BLANK = 0
NEG_INF = float("-inf")

# Hard guard for the path-enumeration oracle (C ** T paths).
BRUTE_FORCE_MAX_PATHS = 10_000_000


def logsumexp(values, axis=None):
    """Stable log-sum-exp; empty or all-(-inf) input yields -inf, never NaN."""
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        return NEG_INF if axis is None else np.full(a.sum(axis=axis).shape, NEG_INF)
    with np.errstate(divide="ignore"):
        m = np.max(a, axis=axis, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class Vocab:
    """Ordered token inventory; index 0 is the CTC blank."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if len(tokens) < 2:
            raise InputError("vocabulary needs the blank plus at least one letter")
        if any(not t for t in tokens):
            raise InputError("vocabulary tokens must be non-empty")
        if len(set(tokens)) != len(tokens):
            raise InputError("vocabulary tokens must be unique")

    @property
    def blank_index(self) -> int:
        return BLANK

    @property
    def letters(self) -> tuple[str, ...]:
        return self.tokens[1:]

    @property
    def num_classes(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class EmissionMatrix:
    """Per-frame log-probabilities over blank-plus-letters, shape (T, C)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InputError("emission matrix must be 2-D (frames x classes)")
        if v.shape[0] < 1:
            raise InputError("emission matrix needs at least one frame")
        if v.shape[1] < 2:
            raise InputError("emission matrix needs blank plus at least one letter")
        object.__setattr__(self, "values", v)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]


def validate_emissions(values: np.ndarray, tol: float = 1e-3) -> None:
    """Check per-frame normalization: logsumexp of every row within tol of 0."""
    v = np.asarray(values, dtype=np.float64)
    top = float(np.max(v))
    if top > tol:
        raise InputError(f"log-probabilities must be <= 0, found {top:.6g}")
    mass = np.atleast_1d(logsumexp(v, axis=1))
    worst = int(np.argmax(np.abs(mass)))
    if abs(mass[worst]) > tol:
        raise InputError(
            f"emission rows are not normalized: frame {worst} has "
            f"log-mass {mass[worst]:.6g} (|mass| > {tol:g})"
        )


def _as_emissions(emissions) -> np.ndarray:
    if isinstance(emissions, EmissionMatrix):
        return emissions.values
    v = np.asarray(emissions, dtype=np.float64)
    if v.ndim != 2:
        raise InputError("emission matrix must be 2-D (frames x classes)")
    if v.shape[0] < 1:
        raise InputError("emission matrix needs at least one frame")
    if v.shape[1] < 2:
        raise InputError("emission matrix needs blank plus at least one letter")
    return v


def _checked_labels(labels: Sequence[int], num_classes: int) -> list[int]:
    out = [int(x) for x in labels]
    for x in out:
        if x < 1 or x >= num_classes:
            raise InputError(f"label index {x} outside [1, {num_classes - 1}]")
    return out


def _extended(labels: Sequence[int]):
    """Blank-interleaved state sequence and its skip-transition mask."""
    z = np.zeros(2 * len(labels) + 1, dtype=np.int64)
    z[1::2] = labels
    skip = np.zeros(z.size, dtype=bool)
    if z.size > 2:
        skip[2:] = (z[2:] != BLANK) & (z[2:] != z[:-2])
    return z, skip


def ctc_forward_trellis(emissions, labels: Sequence[int]) -> np.ndarray:
    """Forward log-alpha trellis of shape (T, 2S+1).

    alpha[t, s] sums all length-(t+1) path prefixes ending in extended
    state s, including the emission at frame t.
    """
    em = _as_emissions(emissions)
    T, C = em.shape
    seq = _checked_labels(labels, C)
    z, skip = _extended(seq)
    L = z.size
    frame = em[:, z]
    alpha = np.full((T, L), NEG_INF)
    alpha[0, 0] = frame[0, 0]
    if L > 1:
        alpha[0, 1] = frame[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if L > 2:
            acc[2:] = np.logaddexp(acc[2:], np.where(skip[2:], prev[:-2], NEG_INF))
        alpha[t] = acc + frame[t]
    return alpha


def ctc_backward_trellis(emissions, labels: Sequence[int]) -> np.ndarray:
    """Backward log-beta trellis of shape (T, 2S+1).

    beta[t, s] sums all path suffixes that start in state s at frame t
    (including the emission at frame t) and finish the sequence, so that
    for every t: logsumexp_s(alpha[t,s] + beta[t,s] - em[t, z_s]) equals
    the total log-likelihood.
    """
    em = _as_emissions(emissions)
    T, C = em.shape
    seq = _checked_labels(labels, C)
    z, skip = _extended(seq)
    L = z.size
    frame = em[:, z]
    beta = np.full((T, L), NEG_INF)
    beta[T - 1, L - 1] = frame[T - 1, L - 1]
    if L > 1:
        beta[T - 1, L - 2] = frame[T - 1, L - 2]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if L > 2:
            acc[:-2] = np.logaddexp(acc[:-2], np.where(skip[2:], nxt[2:], NEG_INF))
        beta[t] = acc + frame[t]
    return beta


def ctc_log_likelihood(emissions, labels: Sequence[int]) -> float:
    """log P(labels | emissions), marginalized over all collapsing paths.

    Returns -inf (not an error) when no path of length T collapses to the
    label sequence.  The empty sequence scores the all-blank path.
    """
    em = _as_emissions(emissions)
    seq = _checked_labels(labels, em.shape[1])
    if not seq:
        return float(em[:, BLANK].sum())
    alpha = ctc_forward_trellis(em, seq)
    return float(np.logaddexp(alpha[-1, -1], alpha[-1, -2]))


def brute_force_log_likelihood(emissions, labels: Sequence[int]) -> float:
    """Path-enumeration oracle: sum over all C**T frame paths that collapse
    (repeat merge, then blank removal) to ``labels``.  Testing only."""
    em = _as_emissions(emissions)
    T, C = em.shape
    seq = _checked_labels(labels, C)
    if C**T > BRUTE_FORCE_MAX_PATHS:
        raise SizeError(f"brute force would enumerate {C}**{T} > {BRUTE_FORCE_MAX_PATHS} paths")
    target = tuple(seq)
    S = len(target)
    rows = [tuple(float(x) for x in em[t]) for t in range(T)]
    matches: list[float] = []
    for path in itertools.product(range(C), repeat=T):
        prev = -1
        n = 0
        ok = True
        for tok in path:
            if tok != prev and tok != BLANK:
                if n == S or tok != target[n]:
                    ok = False
                    break
                n += 1
            prev = tok
        if ok and n == S:
            matches.append(sum(rows[t][tok] for t, tok in enumerate(path)))
    return logsumexp(matches)
