"""Speaker pseudo-labeling by spectral clustering of utterance embeddings.

Pipeline: center by the global mean, cosine similarity, per-row top-k
pruning, symmetrization, unnormalized Laplacian, dense cyclic-Jacobi
eigendecomposition, eigengap model-order selection within a caller range,
k-means++ in the spectral embedding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, NumericError

SYMMETRY_TOL = 1e-9
JACOBI_MAX_SWEEPS = 100
JACOBI_OFF_TOL = 1e-10
RESIDUAL_TOL = 1e-7
DENSE_SIZE_WARNING = 3000


@dataclass(frozen=True)
class EmbeddingSet:
    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise InputError("embeddings must be a 2-D array (count x dim)")
        if v.shape[0] < 2:
            raise InputError("need at least two embeddings")
        if len(self.ids) != v.shape[0]:
            raise InputError("number of ids does not match number of vectors")
        if not np.all(np.isfinite(v)):
            raise InputError("embeddings contain NaN or Inf")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ClusterConfig:
    p: float = 0.01
    k_min: int = 40
    k_max: int = 45
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 100
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise InputError("pruning parameter p must lie in (0, 1]")
        if self.k_min < 1 or self.k_min > self.k_max:
            raise InputError("need 1 <= k_min <= k_max")
        if self.kmeans_restarts < 1 or self.kmeans_max_iters < 1:
            raise InputError("k-means restarts and iterations must be >= 1")


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    k: int
    eigenvalues: np.ndarray
    gaps: np.ndarray


def prune_rows(similarity: np.ndarray, p: float) -> np.ndarray:
    """Keep the top ceil(p*N) off-diagonal values per row (at least one),
    zero the rest.  Ties resolve to the lowest column index."""
    if not 0 < p <= 1:
        raise InputError("pruning parameter p must lie in (0, 1]")
    sim = np.asarray(similarity, dtype=np.float64)
    n = sim.shape[0]
    keep = max(1, int(np.ceil(p * n)))
    masked = sim.copy()
    np.fill_diagonal(masked, -np.inf)
    out = np.zeros_like(sim)
    for i in range(n):
        order = np.argsort(-masked[i], kind="stable")[:keep]
        out[i, order] = sim[i, order]
    np.fill_diagonal(out, 0.0)
    return out


def build_affinity(embeddings, p: float = 0.01) -> np.ndarray:
    """Centered cosine similarity, row-pruned and symmetrized.

    Vectors that are zero after centering get similarity 0 everywhere.
    Negative entries are clamped to 0 and the diagonal is zeroed.
    """
    if isinstance(embeddings, EmbeddingSet):
        x = embeddings.vectors
    else:
        x = np.asarray(embeddings, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise InputError("need a 2-D array with at least two embeddings")
    centered = x - x.mean(axis=0)
    norms = np.linalg.norm(centered, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = centered / safe[:, None]
    sim = unit @ unit.T
    pruned = prune_rows(sim, p)
    affinity = 0.5 * (pruned + pruned.T)
    affinity[affinity < 0] = 0.0
    np.fill_diagonal(affinity, 0.0)
    return affinity


def laplacian(affinity: np.ndarray) -> np.ndarray:
    """Unnormalized graph Laplacian D - A."""
    a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("affinity must be square")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise InputError(f"affinity is asymmetric by {asym:.3g} (> {SYMMETRY_TOL:g})")
    degrees = a.sum(axis=1)
    lap = np.diag(degrees) - a
    return lap


def eigendecompose_symmetric(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below
    1e-10 * ||M||_F (or 100 sweeps, then a NumericError).  Returns
    eigenvalues ascending and eigenvectors as matching columns, each pair
    verified to satisfy ||M v - lambda v|| <= 1e-7 * max(1, ||M||_F).
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError("matrix must be square")
    n = m.shape[0]
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOL:
        raise InputError(f"matrix is asymmetric by {asym:.3g} (> {SYMMETRY_TOL:g})")

    a = 0.5 * (m + m.T)
    vecs = np.eye(n)
    fro = float(np.linalg.norm(a))
    off_tol = JACOBI_OFF_TOL * fro

    def off_norm() -> float:
        # summed directly over off-diagonal entries; the sum(A^2) - sum(diag^2)
        # form cancels catastrophically once nearly converged
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    converged = off_norm() <= off_tol
    for _ in range(JACOBI_MAX_SWEEPS):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if abs(tau) > 1e10:
                    # asymptotic rotation; tau**2 would overflow
                    t = 1.0 / (2.0 * tau)
                elif tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[:, q] = new_q
                a[p, :] = new_p
                a[q, :] = new_q
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                v_p = vecs[:, p].copy()
                v_q = vecs[:, q].copy()
                vecs[:, p] = c * v_p - s * v_q
                vecs[:, q] = s * v_p + c * v_q
        converged = off_norm() <= off_tol
    if not converged:
        raise NumericError(
            f"Jacobi failed to converge in {JACOBI_MAX_SWEEPS} sweeps "
            f"(off-diagonal norm {off_norm():.3g}, tolerance {off_tol:.3g})"
        )

    order = np.argsort(np.diag(a), kind="stable")
    values = np.diag(a)[order].copy()
    vectors = vecs[:, order]

    residual = np.linalg.norm(m @ vectors - vectors * values, axis=0)
    bound = RESIDUAL_TOL * max(1.0, fro)
    worst = float(residual.max()) if n else 0.0
    if worst > bound:
        raise NumericError(f"eigenpair residual {worst:.3g} exceeds {bound:.3g}")
    return values, vectors


def eigengaps(eigenvalues: np.ndarray, k_min: int, k_max: int) -> np.ndarray:
    """Gap lambda_{k+1} - lambda_k (1-based) for each k in [k_min, k_max]."""
    w = np.asarray(eigenvalues, dtype=np.float64)
    if k_min < 1 or k_min > k_max:
        raise InputError("need 1 <= k_min <= k_max")
    if k_max >= w.size:
        raise InputError(f"k_max ({k_max}) must be smaller than the spectrum size ({w.size})")
    return w[k_min : k_max + 1] - w[k_min - 1 : k_max]


def select_k_eigengap(eigenvalues: np.ndarray, k_min: int, k_max: int) -> int:
    """argmax of the eigengap over [k_min, k_max], ties toward smaller k."""
    gaps = eigengaps(eigenvalues, k_min, k_max)
    return k_min + int(np.argmax(gaps))


def _kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    dist2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(dist2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=dist2 / total))
        centers[j] = x[idx]
        dist2 = np.minimum(dist2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iters: int) -> tuple[np.ndarray, float]:
    n, k = x.shape[0], centers.shape[0]
    labels = np.full(n, -1)
    for _ in range(max_iters):
        d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            member = new_labels == j
            if np.any(member):
                centers[j] = x[member].mean(axis=0)
            else:
                # Re-seat an empty cluster on the point farthest from its center.
                assigned = d2[np.arange(n), new_labels]
                far = int(np.argmax(assigned))
                centers[j] = x[far]
                new_labels[far] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, inertia


def kmeans(
    x: np.ndarray, k: int, seed: int = 42, restarts: int = 10, max_iters: int = 100
) -> tuple[np.ndarray, float]:
    """Seeded k-means++ with restarts; best inertia wins (first on ties)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or not 1 <= k <= x.shape[0]:
        raise InputError("need a 2-D array and 1 <= k <= number of points")
    best_labels = None
    best_inertia = np.inf
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centers = _kmeans_plusplus(x, k, rng)
        labels, inertia = _lloyd(x, centers.copy(), max_iters)
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels, best_inertia


def cluster(embeddings: EmbeddingSet, cfg: ClusterConfig) -> ClusterResult:
    """Full pseudo-speaker labeling pipeline."""
    if cfg.k_max >= embeddings.count:
        raise InputError(
            f"k_max ({cfg.k_max}) must be smaller than the number of embeddings "
            f"({embeddings.count})"
        )
    if embeddings.count > DENSE_SIZE_WARNING:
        warnings.warn(
            f"dense eigendecomposition of a {embeddings.count}x{embeddings.count} "
            "Laplacian will be slow",
            RuntimeWarning,
            stacklevel=2,
        )
    affinity = build_affinity(embeddings, cfg.p)
    lap = laplacian(affinity)
    values, vectors = eigendecompose_symmetric(lap)
    gaps = eigengaps(values, cfg.k_min, cfg.k_max)
    k = cfg.k_min + int(np.argmax(gaps))
    spectral = vectors[:, :k]
    labels, _ = kmeans(
        spectral, k, seed=cfg.seed, restarts=cfg.kmeans_restarts, max_iters=cfg.kmeans_max_iters
    )
    return ClusterResult(labels=labels, k=k, eigenvalues=values, gaps=gaps)
