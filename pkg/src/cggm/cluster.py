"""Cluster extraction, Rand-index evaluation, and regularization paths.

A pair of variables lands in the same cluster when the fitted pair block has
(numerically) identical columns; the partition is the connected components of
the resulting fusion graph.  Paths sweep an ascending penalty grid, warm
starting each solve from its predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ShapeMismatchError, UndefinedMetricError
from .model import FusionStructure, column_difference, objective_value
from .solver import AdmmConfig, AdmmState, FitResult, fit

__all__ = [
    "Partition",
    "PathPoint",
    "extract_clusters",
    "rand_index",
    "lambda_path",
    "select_by_k",
]


@dataclass(frozen=True)
class Partition:
    """Cluster assignment of p variables: labels 1..k, every label used."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.intp).reshape(-1)
        if labels.size == 0:
            raise ShapeMismatchError("partition needs at least one variable")
        uniq = np.unique(labels)
        if uniq[0] != 1 or uniq[-1] != uniq.size:
            raise ShapeMismatchError("labels must form a contiguous range 1..k with every id used")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return self.labels.size

    @property
    def k(self) -> int:
        return int(self.labels.max())

    @staticmethod
    def from_raw(raw) -> "Partition":
        """Canonicalize arbitrary hashable labels to 1..k by first occurrence."""
        raw = list(raw)
        seen: dict = {}
        labels = np.empty(len(raw), dtype=np.intp)
        for idx, value in enumerate(raw):
            labels[idx] = seen.setdefault(value, len(seen) + 1)
        return Partition(labels)


@dataclass(frozen=True)
class PathPoint:
    """One penalty value on a regularization path."""

    lam: float
    partition: Partition
    num_clusters: int
    converged: bool
    objective: float


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def extract_clusters(
    pair_blocks: np.ndarray,
    p: int,
    fusion: FusionStructure,
    rel_tol: float = 1e-3,
) -> Partition:
    """Read the cluster assignment off fitted pair blocks.

    A pair counts as fused when its column difference norm is at most
    ``rel_tol * max(1, ||block||_F)``; the partition is the connected
    components over all fused pairs, with unfused variables as singletons.
    Labels are assigned 1..k by first occurrence, so the result does not
    depend on the order of the pair list.
    """
    if rel_tol < 0:
        raise ValueError("rel_tol must be >= 0")
    pair_blocks = np.asarray(pair_blocks, dtype=np.float64)
    if pair_blocks.shape[0] != fusion.num_pairs:
        raise ShapeMismatchError("pair_blocks not aligned with fusion set")

    uf = _UnionFind(p)
    if fusion.num_pairs:
        gaps = np.linalg.norm(column_difference(pair_blocks), axis=1)
        scale = np.maximum(1.0, np.linalg.norm(pair_blocks.reshape(fusion.num_pairs, -1), axis=1))
        for i, j in fusion.pairs[gaps <= rel_tol * scale]:
            uf.union(int(i), int(j))

    roots = [uf.find(v) for v in range(p)]
    return Partition.from_raw(roots)


def rand_index(a: Partition, b: Partition) -> float:
    """Fraction of variable pairs on which two partitions agree about
    co-membership; 1 means identical partitions."""
    if a.p != b.p:
        raise ShapeMismatchError(f"partitions disagree on p: {a.p} vs {b.p}")
    p = a.p
    if p < 2:
        raise UndefinedMetricError("Rand index is undefined for p < 2")
    same_a = a.labels[:, None] == a.labels[None, :]
    same_b = b.labels[:, None] == b.labels[None, :]
    iu = np.triu_indices(p, k=1)
    agree = np.count_nonzero(same_a[iu] == same_b[iu])
    return agree / (p * (p - 1) / 2)


def lambda_path(
    sigma_hat: np.ndarray,
    fusion: FusionStructure,
    grid,
    base_config: AdmmConfig | None = None,
    rel_tol: float = 1e-3,
    return_fits: bool = False,
):
    """Fit every penalty value on an ascending grid with warm starts.

    Returns the list of :class:`PathPoint`; with ``return_fits=True`` also
    the list of :class:`FitResult` (useful for diagnostics).  Non-converged
    points are flagged on the path point, never fatal.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    if any(g < 0 for g in grid):
        raise ValueError("grid values must be >= 0")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be ascending")
    if base_config is None:
        base_config = AdmmConfig()

    points: list[PathPoint] = []
    fits: list[FitResult] = []
    warm: AdmmState | None = None
    for lam in grid:
        config = replace(base_config, lam=lam)
        result = fit(sigma_hat, fusion, config, warm_start=warm)
        warm = result.state
        partition = extract_clusters(result.pair_blocks, fusion.p, fusion, rel_tol)
        objective = objective_value(result.precision, sigma_hat, fusion, lam)
        points.append(
            PathPoint(
                lam=lam,
                partition=partition,
                num_clusters=partition.k,
                converged=result.converged,
                objective=objective,
            )
        )
        fits.append(result)
    if return_fits:
        return points, fits
    return points


def select_by_k(path: list[PathPoint], k_target: int) -> PathPoint:
    """Pick the path point whose cluster count matches ``k_target``.

    Among exact matches the largest penalty wins; with no exact match, the
    point minimizing |num_clusters - k_target| wins, ties broken toward the
    larger penalty.
    """
    if not path:
        raise ValueError("path must be non-empty")
    exact = [pt for pt in path if pt.num_clusters == k_target]
    if exact:
        return max(exact, key=lambda pt: pt.lam)
    return min(path, key=lambda pt: (abs(pt.num_clusters - k_target), -pt.lam))
