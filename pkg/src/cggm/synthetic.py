"""Synthetic clustered precision matrices and Gaussian samples.

Ground truth is built from a one-hot membership matrix and a symmetric
between/within block-value matrix: the precision is the block expansion of
the latter with its diagonal reset to one.  Draws whose block values fail to
give a positive definite precision are rejected and redrawn, preserving the
marginal distributions over accepted draws.  Two preset scenarios mirror the
standard benchmark sizes used throughout the package tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .cluster import Partition
from .exceptions import InvalidSizesError, NotPositiveDefiniteError
from .model import cholesky_lower, mirror_lower

__all__ = [
    "GroundTruth",
    "make_rng",
    "generate_membership",
    "generate_block_matrix",
    "generate_precision",
    "sample_gaussian",
    "generate_instance",
    "scenario",
    "SCENARIOS",
]

SCENARIOS = {
    "I": {"n": 110, "p": 50, "sizes": (5, 15, 30)},
    "II": {"n": 200, "p": 200, "sizes": (30, 60, 110)},
}

_DIAG_LOW, _DIAG_HIGH = 0.6, 0.95
_OFF_LOW, _OFF_HIGH = 0.0, 0.55


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by seed plus optional stream ids.

    Philox is stable across platforms, so a (seed, stream) key always yields
    the same draws; replicate r of an experiment uses ``make_rng(seed, r)``.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class GroundTruth:
    """A generated instance: membership, block values, and the precision."""

    membership: Partition
    block_matrix: np.ndarray
    precision: np.ndarray
    p: int
    k: int
    sizes: tuple[int, ...]


def generate_membership(p: int, sizes, rng: np.random.Generator) -> tuple[Partition, np.ndarray]:
    """Uniformly random assignment of p variables into groups of given sizes.

    Returns the partition (label g+1 for group g) and its one-hot indicator
    matrix of shape (p, k): exactly one 1 per row, column sums equal sizes.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidSizesError(f"sizes must be positive, got {sizes}")
    if sum(sizes) != p:
        raise InvalidSizesError(f"sizes {sizes} sum to {sum(sizes)}, expected p={p}")
    perm = rng.permutation(p)
    labels = np.empty(p, dtype=np.intp)
    start = 0
    for g, s in enumerate(sizes):
        labels[perm[start:start + s]] = g + 1
        start += s
    indicator = np.zeros((p, len(sizes)))
    indicator[np.arange(p), labels - 1] = 1.0
    return Partition(labels), indicator


def generate_block_matrix(k: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric k x k block-value matrix.

    Diagonal entries are Uniform[0.6, 0.95] (within-cluster value), each
    off-diagonal pair is a single Uniform[0, 0.55] draw mirrored.
    """
    if k < 1:
        raise InvalidSizesError(f"k must be >= 1, got {k}")
    block = np.zeros((k, k))
    block[np.diag_indices(k)] = rng.uniform(_DIAG_LOW, _DIAG_HIGH, size=k)
    iu = np.triu_indices(k, k=1)
    block[iu] = rng.uniform(_OFF_LOW, _OFF_HIGH, size=iu[0].size)
    return mirror_lower(block)


def generate_precision(indicator: np.ndarray, block: np.ndarray) -> np.ndarray:
    """Block expansion of the block-value matrix with unit diagonal.

    The off-diagonal entry (u, v) equals block[g(u), g(v)]; positive
    definiteness is verified by Cholesky and failures raise so the caller
    can redraw the block values.
    """
    indicator = np.asarray(indicator, dtype=np.float64)
    block = np.asarray(block, dtype=np.float64)
    if indicator.shape[1] != block.shape[0] or block.shape[0] != block.shape[1]:
        raise InvalidSizesError("indicator and block matrix shapes are incompatible")
    theta = indicator @ block @ indicator.T
    theta = mirror_lower(theta)  # exact symmetry regardless of BLAS rounding
    np.fill_diagonal(theta, 1.0)
    cholesky_lower(theta, "generated precision")
    return theta


def sample_gaussian(theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. mean-zero Gaussian rows with covariance theta^{-1}.

    Sampling solves against the Cholesky factor of theta, never forming the
    covariance: x = L^{-T} y with y standard normal.
    """
    chol = cholesky_lower(np.asarray(theta, dtype=np.float64), "theta")
    y = rng.standard_normal((n, theta.shape[0]))
    return solve_triangular(chol, y.T, lower=True, trans="T").T


def generate_instance(
    p: int,
    sizes,
    n: int,
    rng: np.random.Generator,
    resample_limit: int = 100,
) -> tuple[GroundTruth, np.ndarray]:
    """Full pipeline: membership, block values (redrawn until PD), data."""
    membership, indicator = generate_membership(p, sizes, rng)
    k = len(tuple(sizes))
    for _ in range(resample_limit):
        block = generate_block_matrix(k, rng)
        try:
            theta = generate_precision(indicator, block)
        except NotPositiveDefiniteError:
            continue
        break
    else:
        raise NotPositiveDefiniteError(
            f"no positive definite precision within {resample_limit} block redraws"
        )
    data = sample_gaussian(theta, n, rng)
    truth = GroundTruth(
        membership=membership,
        block_matrix=block,
        precision=theta,
        p=p,
        k=k,
        sizes=tuple(int(s) for s in sizes),
    )
    return truth, data


def scenario(which: str, rng: np.random.Generator) -> tuple[GroundTruth, np.ndarray]:
    """Preset instance: Scenario I (n=110, p=50, sizes 5/15/30) or
    Scenario II (n=200, p=200, sizes 30/60/110)."""
    try:
        spec = SCENARIOS[str(which).upper()]
    except KeyError:
        raise ValueError(f"unknown scenario {which!r}; choose I or II") from None
    return generate_instance(spec["p"], spec["sizes"], spec["n"], rng)
