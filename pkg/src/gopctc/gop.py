"""Alignment-free substitution/deletion pronunciation features.

Every single-letter perturbation of the canonical sequence is scored by
full CTC marginalization; no frame-to-letter alignment is computed
anywhere.  Two equivalent code paths exist:

* ``naive`` re-runs one full forward pass per perturbed sequence;
* ``optimized`` reuses the canonical forward/backward trellises.  Only
  the extended-sequence states at the perturbed position change, so each
  perturbation reduces to a single O(T) stitching sweep over the shared
  prefix/suffix scores.  The skip-transition structure next to the
  perturbed position depends on the replacement letter and is re-derived
  locally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ctc import (
    BLANK,
    NEG_INF,
    Vocab,
    _as_emissions,
    _checked_labels,
    ctc_backward_trellis,
    ctc_forward_trellis,
    ctc_log_likelihood,
    logsumexp,
)
from .errors import CompatibilityError, InputError

DEFAULT_CLAMP = 50.0
MODES = ("naive", "optimized")


@dataclass(frozen=True)
class GopFeatureSet:
    """Per-letter pronunciation features for one utterance.

    Row i of the assembled matrix is
    ``[lpp, lpr_sub[i, :], lpr_del[i], letter_onehot[i, :]]`` with all
    three likelihood-ratio blocks clamped to ``[-clamp, +clamp]``.
    """

    utt_id: str
    lpp: float
    lpr_sub: np.ndarray
    lpr_del: np.ndarray
    letter_onehot: np.ndarray
    clamp: float

    def __post_init__(self):
        sub = np.asarray(self.lpr_sub, dtype=np.float64)
        dele = np.asarray(self.lpr_del, dtype=np.float64)
        onehot = np.asarray(self.letter_onehot, dtype=np.float64)
        if sub.ndim != 2 or onehot.shape != sub.shape or dele.shape != (sub.shape[0],):
            raise InputError("inconsistent feature block shapes")
        object.__setattr__(self, "lpr_sub", sub)
        object.__setattr__(self, "lpr_del", dele)
        object.__setattr__(self, "letter_onehot", onehot)

    @property
    def seq_len(self) -> int:
        return self.lpr_sub.shape[0]

    @property
    def num_letters(self) -> int:
        return self.lpr_sub.shape[1]

    @property
    def feature_dim(self) -> int:
        return 2 * self.num_letters + 2

    def letter_indices(self) -> list[int]:
        return [int(j) + 1 for j in np.argmax(self.letter_onehot, axis=1)]

    def feature_matrix(self) -> np.ndarray:
        lpp_col = np.full((self.seq_len, 1), self.lpp)
        return np.hstack([lpp_col, self.lpr_sub, self.lpr_del[:, None], self.letter_onehot])


def _clamped_ratio(lpp: float, hyp_ll: float, clamp: float) -> float:
    # Equal log-likelihoods (including both -inf: canonical and hypothesis
    # unattainable alike) carry no preference either way.
    if lpp == NEG_INF and hyp_ll == NEG_INF:
        ratio = 0.0
    else:
        ratio = lpp - hyp_ll
    return float(min(max(ratio, -clamp), clamp))


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}, expected one of {MODES}")


def compute_lpp(emissions, canonical: Sequence[int]) -> float:
    """CTC log-likelihood of the full canonical sequence (unclamped)."""
    if len(canonical) < 1:
        raise InputError("canonical sequence must be non-empty")
    return ctc_log_likelihood(emissions, canonical)


def _substitution_lls_naive(em: np.ndarray, seq: list[int]) -> np.ndarray:
    T, C = em.shape
    out = np.empty((len(seq), C - 1))
    for i in range(len(seq)):
        hyp = list(seq)
        for j in range(1, C):
            hyp[i] = j
            out[i, j - 1] = ctc_log_likelihood(em, hyp)
    return out


def _deletion_lls_naive(em: np.ndarray, seq: list[int]) -> np.ndarray:
    out = np.empty(len(seq))
    for i in range(len(seq)):
        out[i] = ctc_log_likelihood(em, seq[:i] + seq[i + 1 :])
    return out


def _substitution_lls_stitched(
    em: np.ndarray, seq: list[int], alpha: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    """Log-likelihood of every single-letter substitution, shape (S, C-1).

    A path for the substituted sequence must occupy the replaced letter's
    extended state u for one contiguous frame interval; prefix scores up
    to state u-1 and suffix scores from state u+1 on are unchanged, so
    entry/exit factors come straight from the canonical trellises.
    """
    T, C = em.shape
    S = len(seq)
    V = C - 1
    letter_em = em[:, 1:]
    out = np.empty((S, V))
    for idx in range(S):
        u = 2 * idx + 1

        # Entry factor per start frame: arrive from the preceding blank, or
        # skip from the previous letter when the replacement differs from it.
        a_base = np.full(T, NEG_INF)
        if idx == 0:
            a_base[0] = 0.0
        if T > 1:
            a_base[1:] = alpha[:-1, u - 1]
        if idx > 0:
            a_extra = np.full(T, NEG_INF)
            a_extra[1:] = alpha[:-1, u - 2]
            a_skip = np.logaddexp(a_base, a_extra)
        else:
            a_skip = a_base

        # Exit factor per end frame: leave into the following blank, or skip
        # to the next letter when the replacement differs from it.
        b_base = np.full(T, NEG_INF)
        if idx == S - 1:
            b_base[T - 1] = 0.0
        if T > 1:
            b_base[:-1] = beta[1:, u + 1]
        if idx < S - 1:
            b_extra = np.full(T, NEG_INF)
            b_extra[:-1] = beta[1:, u + 2]
            b_skip = np.logaddexp(b_base, b_extra)
        else:
            b_skip = b_base

        a_mat = np.broadcast_to(a_skip[:, None], (T, V)).copy()
        b_mat = np.broadcast_to(b_skip[:, None], (T, V)).copy()
        if idx > 0:
            a_mat[:, seq[idx - 1] - 1] = a_base
        if idx < S - 1:
            b_mat[:, seq[idx + 1] - 1] = b_base

        occ = np.full(V, NEG_INF)
        total = np.full(V, NEG_INF)
        for t in range(T):
            occ = np.logaddexp(a_mat[t], occ) + letter_em[t]
            total = np.logaddexp(total, occ + b_mat[t])
        out[idx] = total
    return out


def _deletion_lls_stitched(
    em: np.ndarray, seq: list[int], alpha: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    """Log-likelihood of every single-letter deletion, shape (S,).

    Deleting letter i merges its surrounding blanks into one; paths either
    pass through that merged blank, jump straight from the previous letter
    to the next one (when those differ), start directly at the next letter
    (i = first), or end at the previous letter (i = last).
    """
    T, C = em.shape
    S = len(seq)
    blank_em = em[:, BLANK]
    out = np.empty(S)
    if S == 1:
        out[0] = float(blank_em.sum())
        return out
    for idx in range(S):
        u = 2 * idx + 1

        a = np.full(T, NEG_INF)
        if idx == 0:
            a[0] = 0.0
        elif T > 1:
            a[1:] = alpha[:-1, u - 2]
        b = np.full(T, NEG_INF)
        if idx == S - 1:
            b[T - 1] = 0.0
        elif T > 1:
            b[:-1] = beta[1:, u + 2]

        occ = NEG_INF
        blank_total = NEG_INF
        for t in range(T):
            occ = float(np.logaddexp(a[t], occ)) + blank_em[t]
            blank_total = float(np.logaddexp(blank_total, occ + b[t]))

        parts = [blank_total]
        if 0 < idx < S - 1 and seq[idx - 1] != seq[idx + 1]:
            parts.append(logsumexp(alpha[:-1, u - 2] + beta[1:, u + 2]))
        if idx == 0:
            parts.append(float(beta[0, u + 2]))
        if idx == S - 1:
            parts.append(float(alpha[T - 1, u - 2]))
        out[idx] = logsumexp(parts)
    return out


def compute_lpr_sub(
    emissions, canonical: Sequence[int], mode: str = "optimized", clamp: float = DEFAULT_CLAMP
) -> np.ndarray:
    """Substitution log-posterior ratios, shape (S, C-1).

    Entry (i, j) is the canonical log-likelihood minus that of the
    sequence with letter i replaced by letter class j+1; self
    substitutions are exactly 0.  Infinite ratios clamp to +/-clamp.
    """
    _check_mode(mode)
    em = _as_emissions(emissions)
    seq = _checked_labels(canonical, em.shape[1])
    if not seq:
        raise InputError("canonical sequence must be non-empty")
    lpp = ctc_log_likelihood(em, seq)
    if mode == "naive":
        lls = _substitution_lls_naive(em, seq)
    else:
        alpha = ctc_forward_trellis(em, seq)
        beta = ctc_backward_trellis(em, seq)
        lls = _substitution_lls_stitched(em, seq, alpha, beta)
    out = np.empty_like(lls)
    for i in range(len(seq)):
        for j in range(lls.shape[1]):
            out[i, j] = 0.0 if j + 1 == seq[i] else _clamped_ratio(lpp, lls[i, j], clamp)
    return out


def compute_lpr_del(
    emissions, canonical: Sequence[int], mode: str = "optimized", clamp: float = DEFAULT_CLAMP
) -> np.ndarray:
    """Deletion log-posterior ratios, shape (S,); clamped like lpr_sub."""
    _check_mode(mode)
    em = _as_emissions(emissions)
    seq = _checked_labels(canonical, em.shape[1])
    if not seq:
        raise InputError("canonical sequence must be non-empty")
    lpp = ctc_log_likelihood(em, seq)
    if mode == "naive":
        lls = _deletion_lls_naive(em, seq)
    else:
        alpha = ctc_forward_trellis(em, seq)
        beta = ctc_backward_trellis(em, seq)
        lls = _deletion_lls_stitched(em, seq, alpha, beta)
    return np.array([_clamped_ratio(lpp, ll, clamp) for ll in lls])


def assemble_features(
    utt_id: str,
    emissions,
    canonical: Sequence[int],
    vocab: Vocab | None = None,
    mode: str = "optimized",
    clamp: float = DEFAULT_CLAMP,
) -> GopFeatureSet:
    """Assemble the per-letter feature set for one utterance.

    The canonical trellises are computed once and shared between the
    substitution and deletion scorers in optimized mode.
    """
    _check_mode(mode)
    em = _as_emissions(emissions)
    T, C = em.shape
    if vocab is not None and vocab.num_classes != C:
        raise CompatibilityError(
            f"vocabulary has {vocab.num_classes} classes but emissions have {C}"
        )
    seq = _checked_labels(canonical, C)
    if not seq:
        raise InputError("canonical sequence must be non-empty")
    S = len(seq)
    V = C - 1

    lpp = ctc_log_likelihood(em, seq)
    if mode == "naive":
        sub_lls = _substitution_lls_naive(em, seq)
        del_lls = _deletion_lls_naive(em, seq)
    else:
        alpha = ctc_forward_trellis(em, seq)
        beta = ctc_backward_trellis(em, seq)
        sub_lls = _substitution_lls_stitched(em, seq, alpha, beta)
        del_lls = _deletion_lls_stitched(em, seq, alpha, beta)

    lpr_sub = np.empty((S, V))
    for i in range(S):
        for j in range(V):
            lpr_sub[i, j] = 0.0 if j + 1 == seq[i] else _clamped_ratio(lpp, sub_lls[i, j], clamp)
    lpr_del = np.array([_clamped_ratio(lpp, ll, clamp) for ll in del_lls])
    onehot = np.zeros((S, V))
    onehot[np.arange(S), np.array(seq) - 1] = 1.0
    lpp_feat = float(min(max(lpp, -clamp), clamp))
    return GopFeatureSet(
        utt_id=utt_id,
        lpp=lpp_feat,
        lpr_sub=lpr_sub,
        lpr_del=lpr_del,
        letter_onehot=onehot,
        clamp=float(clamp),
    )
