"""Problem data for the clustered Gaussian graphical model.

The estimand is a symmetric positive definite precision matrix whose
rows/columns are encouraged to fuse into checkerboard blocks.  Fusion acts on
variable pairs: for a pair (i, j) the two columns of the precision matrix,
restricted to the remaining p-2 variables, are the "connectivity profiles" of
i and j, and the penalty charges the Euclidean norm of their difference.
This module holds the fusion structure (which pairs are penalized, with what
weight), the profile-pair extraction, and the objective/penalty evaluation.

All pair selection is done with index arithmetic; the selection operators are
never materialized as matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import (
    InvalidWeightError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    PenaltyVacuousError,
    ShapeMismatchError,
)

__all__ = [
    "FusionStructure",
    "build_fusion_structure",
    "all_pairs",
    "extract_pair_columns",
    "extract_all_pairs",
    "column_difference",
    "penalty_value",
    "objective_value",
    "require_symmetric",
    "sym_part",
    "mirror_lower",
    "cholesky_lower",
]


# ---------------------------------------------------------------------------
# symmetric-matrix helpers
# ---------------------------------------------------------------------------

def require_symmetric(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a square, exactly symmetric float array.

    Symmetry must hold bit-exactly; near-symmetric inputs are rejected rather
    than silently repaired (use :func:`sym_part` or :func:`mirror_lower` to
    repair explicitly).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatchError(f"{name} must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        raise NotSymmetricError(f"{name} is not exactly symmetric")
    return a


def sym_part(a: np.ndarray) -> np.ndarray:
    """Symmetric part (a + a.T)/2; exactly symmetric in floating point."""
    return (a + a.T) / 2.0


def mirror_lower(a: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one, forcing exact symmetry."""
    out = np.triu(a)
    out = out + np.triu(a, 1).T
    return out


def cholesky_lower(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, or NotPositiveDefiniteError if none exists."""
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from None


# ---------------------------------------------------------------------------
# fusion structure
# ---------------------------------------------------------------------------

def all_pairs(p: int) -> np.ndarray:
    """All C(p,2) index pairs (i, j), 0-based, i < j, lexicographic order."""
    i, j = np.triu_indices(p, k=1)
    return np.column_stack([i, j]).astype(np.intp)


@dataclass
class FusionStructure:
    """The set of penalized variable pairs and their fusion weights.

    Only pairs with strictly positive weight are stored; every other pair
    implicitly has weight zero and is never penalized.  Index machinery used
    by the solver (per-pair complement rows, pair degrees) is precomputed
    here, since it depends only on the pair set.

    Attributes
    ----------
    p : int
        Number of variables.
    pairs : ndarray of shape (m, 2)
        Penalized pairs, 0-based, i < j.
    weights : ndarray of shape (m,)
        Strictly positive fusion weights, aligned with ``pairs``.
    complement : ndarray of shape (m, p-2)
        For each pair, the remaining variable indices in increasing order.
    degrees : ndarray of shape (p,)
        Number of penalized pairs each variable participates in.
    """

    p: int
    pairs: np.ndarray
    weights: np.ndarray
    complement: np.ndarray = field(init=False, repr=False)
    degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.p < 3:
            raise PenaltyVacuousError(
                f"fusion penalty needs p >= 3, got p={self.p}: pair blocks would have p-2 <= 0 rows"
            )
        self.pairs = np.asarray(self.pairs, dtype=np.intp).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.pairs.shape[0] != self.weights.shape[0]:
            raise ShapeMismatchError("pairs and weights length mismatch")
        if self.pairs.size:
            i, j = self.pairs[:, 0], self.pairs[:, 1]
            if np.any(i >= j) or np.any(i < 0) or np.any(j >= self.p):
                raise ShapeMismatchError("pairs must satisfy 0 <= i < j < p")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0.0):
            raise InvalidWeightError("stored fusion weights must be finite and > 0")

        m = self.pairs.shape[0]
        mask = np.ones((m, self.p), dtype=bool)
        rows = np.arange(m)
        if m:
            mask[rows, self.pairs[:, 0]] = False
            mask[rows, self.pairs[:, 1]] = False
        base = np.broadcast_to(np.arange(self.p, dtype=np.intp), (m, self.p))
        self.complement = base[mask].reshape(m, self.p - 2)
        self.degrees = np.bincount(self.pairs.ravel(), minlength=self.p).astype(np.float64)

        for arr in (self.pairs, self.weights, self.complement, self.degrees):
            arr.flags.writeable = False

    @property
    def num_pairs(self) -> int:
        return self.pairs.shape[0]

    def weight(self, i: int, j: int) -> float:
        """Weight of pair (i, j); zero for pairs outside the fusion set."""
        if i > j:
            i, j = j, i
        hit = np.flatnonzero((self.pairs[:, 0] == i) & (self.pairs[:, 1] == j))
        return float(self.weights[hit[0]]) if hit.size else 0.0


def build_fusion_structure(
    p: int,
    scheme: str = "uniform",
    *,
    data: np.ndarray | None = None,
    knn: int = 5,
    phi: float = 0.5,
    pair_weights: dict[tuple[int, int], float] | None = None,
) -> FusionStructure:
    """Build the fusion structure for ``p`` variables under a weight scheme.

    Parameters
    ----------
    p : int
        Number of variables; must be >= 3.
    scheme : {"uniform", "gaussian-knn", "explicit"}
        ``uniform`` puts weight 1 on every pair.  ``gaussian-knn`` puts
        weight exp(-phi * d(i,j)^2) on pairs where one variable is among the
        ``knn`` nearest neighbors of the other (Euclidean distance between
        data columns) and zero elsewhere.  ``explicit`` takes user weights.
    data : ndarray of shape (n, p), required for ``gaussian-knn``
        Observations whose columns define the distances.
    knn, phi : int, float
        Neighborhood size and kernel bandwidth for ``gaussian-knn``.
    pair_weights : dict mapping (i, j) -> weight, required for ``explicit``
        0-based pairs with i < j; missing pairs default to weight 0.

    Raises
    ------
    PenaltyVacuousError
        If p < 3.
    InvalidWeightError
        If a supplied weight is negative or non-finite.
    """
    if p < 3:
        raise PenaltyVacuousError(
            f"fusion penalty needs p >= 3, got p={p}: pair blocks would have p-2 <= 0 rows"
        )
    pairs = all_pairs(p)

    if scheme == "uniform":
        w = np.ones(pairs.shape[0])
    elif scheme == "gaussian-knn":
        if data is None:
            raise ValueError("gaussian-knn scheme requires data")
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != p:
            raise ShapeMismatchError(f"data must have {p} columns, got {data.shape}")
        if knn < 1:
            raise ValueError("knn must be >= 1")
        if phi < 0:
            raise InvalidWeightError("phi must be >= 0")
        d2 = squareform(pdist(data.T, metric="sqeuclidean"))
        # j is a neighbor of i if among the knn smallest distances from i
        order = np.argsort(d2, axis=1, kind="stable")
        neigh = np.zeros((p, p), dtype=bool)
        take = min(knn + 1, p)  # self sorts first at distance 0
        np.put_along_axis(neigh, order[:, :take], True, axis=1)
        np.fill_diagonal(neigh, False)
        keep = neigh | neigh.T
        w = np.where(keep[pairs[:, 0], pairs[:, 1]],
                     np.exp(-phi * d2[pairs[:, 0], pairs[:, 1]]), 0.0)
    elif scheme == "explicit":
        if pair_weights is None:
            raise ValueError("explicit scheme requires pair_weights")
        w = np.zeros(pairs.shape[0])
        index = {(int(i), int(j)): k for k, (i, j) in enumerate(pairs)}
        for (i, j), wij in pair_weights.items():
            wij = float(wij)
            if not np.isfinite(wij) or wij < 0:
                raise InvalidWeightError(f"weight for pair ({i},{j}) must be finite and >= 0, got {wij}")
            key = (int(i), int(j)) if i < j else (int(j), int(i))
            if key not in index:
                raise ShapeMismatchError(f"pair {key} out of range for p={p}")
            w[index[key]] = wij
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")

    keep = w > 0.0
    return FusionStructure(p=p, pairs=pairs[keep], weights=w[keep])


# ---------------------------------------------------------------------------
# profile-pair extraction
# ---------------------------------------------------------------------------

def extract_pair_columns(theta: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """Connectivity profiles of one variable pair.

    Returns the (p-2) x 2 block whose first column is theta[q, i] and second
    column is theta[q, j], with q running over all variables except i and j
    in increasing order.
    """
    theta = np.asarray(theta, dtype=np.float64)
    p = theta.shape[0]
    i, j = int(pair[0]), int(pair[1])
    if p < 3:
        raise PenaltyVacuousError(f"pair extraction needs p >= 3, got p={p}")
    if not (0 <= i < j < p):
        raise ShapeMismatchError(f"pair ({i},{j}) invalid for p={p}")
    rows = np.delete(np.arange(p), [i, j])
    return theta[np.ix_(rows, [i, j])]


def extract_all_pairs(theta: np.ndarray, fusion: FusionStructure) -> np.ndarray:
    """Profiles of every penalized pair at once, shape (m, p-2, 2)."""
    m = fusion.num_pairs
    out = np.empty((m, fusion.p - 2, 2))
    if m:
        out[:, :, 0] = theta[fusion.complement, fusion.pairs[:, 0, None]]
        out[:, :, 1] = theta[fusion.complement, fusion.pairs[:, 1, None]]
    return out


def column_difference(block: np.ndarray) -> np.ndarray:
    """First column minus second column of a pair block (or batch of blocks).

    Equals the action of the directed difference operator on the
    column-stacked block.
    """
    block = np.asarray(block, dtype=np.float64)
    return block[..., 0] - block[..., 1]


# ---------------------------------------------------------------------------
# objective and penalty
# ---------------------------------------------------------------------------

def penalty_value(theta: np.ndarray, fusion: FusionStructure, lam: float) -> float:
    """Fusion penalty lam * sum_l w_l * ||profile_i - profile_j||_2 at theta."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0.0 or fusion.num_pairs == 0:
        return 0.0
    diffs = column_difference(extract_all_pairs(theta, fusion))
    norms = np.sqrt(np.einsum("lq,lq->l", diffs, diffs))
    return float(lam * np.dot(fusion.weights, norms))


def objective_value(
    theta: np.ndarray,
    sigma_hat: np.ndarray,
    fusion: FusionStructure,
    lam: float,
) -> float:
    """Penalized negative Gaussian log-likelihood at a candidate precision.

    -log det(theta) + trace(sigma_hat @ theta) plus the fusion penalty.
    The log-determinant is taken from the Cholesky pivots; a non-PD theta
    raises NotPositiveDefiniteError.
    """
    theta = require_symmetric(theta, "theta")
    sigma_hat = require_symmetric(sigma_hat, "sigma_hat")
    if theta.shape != sigma_hat.shape:
        raise ShapeMismatchError("theta and sigma_hat dimensions differ")
    chol = cholesky_lower(theta, "theta")
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return -logdet + float(np.sum(sigma_hat * theta)) + penalty_value(theta, fusion, lam)
