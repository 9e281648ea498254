"""Preprocessing for raw trace matrices: centering, covariance, order-1
autoregressive prewhitening, and rank-based Gaussianization.

The canonical pipeline for recorded time series is whiten -> gaussianize ->
center -> covariance; each step is column-separable and deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .exceptions import DegenerateColumnError, NotCenteredError, ShapeMismatchError
from .model import mirror_lower

__all__ = [
    "center_columns",
    "empirical_covariance",
    "ar1_prewhiten",
    "nonparanormal_transform",
    "CANONICAL_STEPS",
    "apply_steps",
]

CANONICAL_STEPS = ("whiten", "npn", "center")

# column means within 1e-10 of zero (relative to column RMS) count as centered
_CENTER_RTOL = 1e-10


def _as_data(x, min_rows: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"data must be 2-D (n x p), got shape {x.shape}")
    if x.shape[0] < min_rows:
        raise ShapeMismatchError(f"need at least {min_rows} rows, got {x.shape[0]}")
    return x


def center_columns(x: np.ndarray) -> np.ndarray:
    """Subtract each column's mean; idempotent."""
    x = _as_data(x, min_rows=2)
    return x - x.mean(axis=0, keepdims=True)


def is_centered(x: np.ndarray) -> bool:
    x = np.asarray(x, dtype=np.float64)
    scale = np.maximum(np.sqrt(np.mean(x * x, axis=0)), 1.0)
    return bool(np.all(np.abs(x.mean(axis=0)) <= _CENTER_RTOL * scale))


def empirical_covariance(x: np.ndarray) -> np.ndarray:
    """(1/n) X^T X for centered X, exactly symmetric by triangle mirroring."""
    x = _as_data(x, min_rows=2)
    if not is_centered(x):
        raise NotCenteredError("empirical covariance requires column-centered data")
    n = x.shape[0]
    return mirror_lower(x.T @ x / n)


def ar1_prewhiten(x: np.ndarray) -> np.ndarray:
    """Remove lag-1 serial dependence from each column independently.

    The coefficient is the column's lag-1 autocorrelation (Yule-Walker order
    one, computed on the demeaned series); the output holds the residuals
    x_t - phi * x_{t-1} for t >= 2, so one row is lost.
    """
    x = _as_data(x, min_rows=3)
    centered = x - x.mean(axis=0, keepdims=True)
    denom = np.sum(centered * centered, axis=0)
    bad = np.flatnonzero(denom == 0.0)
    if bad.size:
        raise DegenerateColumnError(
            f"column {bad[0]} has zero variance", column=int(bad[0])
        )
    phi = np.sum(centered[1:] * centered[:-1], axis=0) / denom
    return x[1:] - phi[None, :] * x[:-1]


def nonparanormal_transform(x: np.ndarray) -> np.ndarray:
    """Rank-based Gaussianization of each column.

    Empirical CDF values rank/(n+1) (average ranks on ties) are winsorized
    into [d_n, 1 - d_n] with d_n = 1 / (4 n^{1/4} sqrt(pi log n)), pushed
    through the standard normal quantile function, and rescaled to unit
    sample variance.  Strictly monotone transforms of a column leave the
    output unchanged.
    """
    x = _as_data(x, min_rows=2)
    n = x.shape[0]
    d_n = 1.0 / (4.0 * n**0.25 * np.sqrt(np.pi * np.log(n)))
    u = rankdata(x, axis=0, method="average") / (n + 1.0)
    z = ndtri(np.clip(u, d_n, 1.0 - d_n))
    sd = z.std(axis=0, ddof=1)
    sd[sd == 0.0] = 1.0  # constant column maps to all zeros; nothing to rescale
    return z / sd


def apply_steps(x: np.ndarray, steps) -> np.ndarray:
    """Run preprocessing steps in the order given (default order is
    whiten, npn, center)."""
    table = {
        "whiten": ar1_prewhiten,
        "npn": nonparanormal_transform,
        "center": center_columns,
    }
    for name in steps:
        try:
            step = table[name]
        except KeyError:
            raise ValueError(f"unknown preprocessing step {name!r}; choose from {sorted(table)}") from None
        x = step(x)
    return x
