"""Reference clusterers for comparison runs.

Both methods cluster the p variables (columns), each represented by its
length-n observation profile: k-means with careful seeding and restarts, and
agglomerative Ward clustering driven by a precomputed dissimilarity matrix.
"""

from __future__ import annotations

import numpy as np

from .cluster import Partition
from .exceptions import DegenerateColumnError, InvalidKError, ShapeMismatchError
from .model import mirror_lower

__all__ = [
    "kmeans_cluster",
    "correlation_dissimilarity",
    "euclidean_dissimilarity",
    "ward_cluster",
]

_LLOYD_MAX_ITERS = 300


def _kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[c:] = points[rng.integers(n, size=k - c)]
            break
        centers[c] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, rng: np.random.Generator):
    """Lloyd iterations; returns labels, final WCSS, and the WCSS history."""
    k = centers.shape[0]
    history = []
    labels = None
    for _ in range(_LLOYD_MAX_ITERS):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(points.shape[0]), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if members.shape[0] == 0:
                # revive an empty cluster at the point farthest from its center
                far = int(np.argmax(d2[np.arange(points.shape[0]), labels]))
                centers[c] = points[far]
            else:
                centers[c] = members.mean(axis=0)
    return labels, history[-1], history


def kmeans_cluster(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    restarts: int = 10,
) -> Partition:
    """Cluster the columns of ``x`` into k groups with k-means.

    Runs Lloyd's algorithm from ``restarts`` k-means++ seedings and keeps the
    labeling with the smallest within-cluster sum of squares; deterministic
    for a given generator state.
    """
    x = np.asarray(x, dtype=np.float64)
    points = x.T  # variables as points in observation space
    p = points.shape[0]
    if k < 1 or k > p:
        raise InvalidKError(f"k must be in [1, {p}], got {k}")
    best_labels, best_wcss = None, np.inf
    for _ in range(max(1, restarts)):
        centers = _kmeanspp_seed(points, k, rng)
        labels, wcss, _ = _lloyd(points, centers, rng)
        if wcss < best_wcss:
            best_labels, best_wcss = labels, wcss
    return Partition.from_raw(best_labels)


def correlation_dissimilarity(x: np.ndarray) -> np.ndarray:
    """d(i, j) = 1 - |pearson correlation of columns i and j|."""
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(axis=0)
    bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise DegenerateColumnError(
            f"column {bad[0]} is constant; correlation undefined", column=int(bad[0])
        )
    corr = np.corrcoef(x, rowvar=False)
    d = 1.0 - np.abs(corr)
    d = mirror_lower(np.clip(d, 0.0, None))
    np.fill_diagonal(d, 0.0)
    return d


def euclidean_dissimilarity(x: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between columns."""
    x = np.asarray(x, dtype=np.float64)
    g = x.T @ x
    sq = np.diag(g)
    d2 = np.clip(sq[:, None] + sq[None, :] - 2.0 * g, 0.0, None)
    d = mirror_lower(np.sqrt(d2))
    np.fill_diagonal(d, 0.0)
    return d


def ward_cluster(d: np.ndarray, k: int) -> Partition:
    """Agglomerative clustering with Ward's minimum-variance linkage.

    Merges are driven by the Lance-Williams recurrence on squared
    dissimilarities and stop once k clusters remain.  Ties break toward the
    lexicographically smallest index pair, so results are deterministic,
    and uniform rescaling of ``d`` cannot change the partition.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ShapeMismatchError(f"dissimilarity matrix must be square, got {d.shape}")
    p = d.shape[0]
    if k < 1 or k > p:
        raise InvalidKError(f"k must be in [1, {p}], got {k}")

    work = d.astype(np.float64) ** 2
    np.fill_diagonal(work, np.inf)
    work[np.tril_indices(p, k=-1)] = np.inf  # active entries live in the upper triangle
    sizes = np.ones(p)
    alive = np.ones(p, dtype=bool)
    members: list[list[int]] = [[v] for v in range(p)]

    for _ in range(p - k):
        flat = int(np.argmin(work))  # row-major argmin = lexicographic tie-break
        i, j = divmod(flat, p)
        ni, nj = sizes[i], sizes[j]
        # Lance-Williams update of every remaining cluster against the merge
        others = np.flatnonzero(alive)
        others = others[(others != i) & (others != j)]
        for h in others:
            dhi = work[min(h, i), max(h, i)]
            dhj = work[min(h, j), max(h, j)]
            dij = work[i, j]
            nh = sizes[h]
            new = ((nh + ni) * dhi + (nh + nj) * dhj - nh * dij) / (nh + ni + nj)
            work[min(h, i), max(h, i)] = new
        alive[j] = False
        sizes[i] = ni + nj
        members[i].extend(members[j])
        members[j] = []
        work[j, :] = np.inf
        work[:, j] = np.inf

    cluster_of = np.empty(p, dtype=np.intp)
    for root in np.flatnonzero(alive):
        cluster_of[members[root]] = root
    return Partition.from_raw(cluster_of)
