"""Three-block ADMM solver for the clustered Gaussian graphical model.

The augmented-Lagrangian splitting carries three primal blocks: the precision
matrix, one profile-pair block per penalized pair (a local copy of the pair's
two connectivity profiles), and one difference vector per pair (a copy of the
block's column difference, which is what the group penalty shrinks).  Two
dual families track the two constraint families.  Each outer iteration:

  (i)   minimize the smooth precision subproblem by gradient descent with a
        backtracking (Armijo) line search that also safeguards positive
        definiteness,
  (ii)  update every pair block by a closed form (a 2x2 right factor obtained
        from a rank-one inverse),
  (iii) update every difference vector by group soft-thresholding,
  (iv)+(v) take dual ascent steps,

until combined absolute/relative primal and dual residual tolerances hold.
Steps (ii)-(v) are independent across pairs and are evaluated as whole-array
operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve

from .exceptions import (
    LineSearchStalledError,
    NotPositiveDefiniteError,
    ShapeMismatchError,
)
from .model import (
    FusionStructure,
    cholesky_lower,
    column_difference,
    extract_all_pairs,
    require_symmetric,
    sym_part,
)

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "FitResult",
    "initial_state",
    "precision_gradient",
    "update_precision",
    "update_pair_blocks",
    "group_prox",
    "update_diffs",
    "update_duals",
    "residuals",
    "stopping_thresholds",
    "fit",
]

_DIFF_SIGN = np.array([1.0, -1.0])
_MIN_STEP = 1e-16


@dataclass(frozen=True)
class AdmmConfig:
    """Solver parameters; defaults follow standard ADMM practice.

    ``rho1`` and ``rho2`` are the two augmented-Lagrangian parameters, fixed
    throughout a solve.  The outer loop stops on a combined
    absolute/relative residual rule; the inner gradient descent stops when
    the symmetric-gradient Frobenius norm falls below ``inner_grad_tol * p``.
    """

    rho1: float = 1.0
    rho2: float = 1.0
    lam: float = 0.0
    outer_max_iters: int = 2000
    outer_tol_abs: float = 1e-5
    outer_tol_rel: float = 1e-4
    inner_max_iters: int = 100
    inner_grad_tol: float = 1e-6
    armijo_beta: float = 0.5
    armijo_c: float = 1e-4
    initial_step: float = 1.0

    def __post_init__(self):
        if self.rho1 <= 0 or self.rho2 <= 0:
            raise ValueError("rho1 and rho2 must be > 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.outer_max_iters < 1 or self.inner_max_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.outer_tol_abs <= 0 or self.outer_tol_rel <= 0 or self.inner_grad_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if not (0.0 < self.armijo_beta < 1.0) or not (0.0 < self.armijo_c < 1.0):
            raise ValueError("armijo_beta and armijo_c must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be > 0")


@dataclass
class AdmmState:
    """Mutable iterate of the solver.

    Per-pair quantities are arrays aligned with ``fusion.pairs``:
    ``pair_blocks`` (m, p-2, 2) are the profile-pair copies, ``diffs``
    (m, p-2) the penalized difference copies, ``block_duals`` and
    ``diff_duals`` the scaled dual variables of the two constraint families.
    """

    fusion: FusionStructure
    precision: np.ndarray
    pair_blocks: np.ndarray
    diffs: np.ndarray
    block_duals: np.ndarray
    diff_duals: np.ndarray
    outer_iter: int = 0

    def copy(self) -> "AdmmState":
        return AdmmState(
            fusion=self.fusion,
            precision=self.precision.copy(),
            pair_blocks=self.pair_blocks.copy(),
            diffs=self.diffs.copy(),
            block_duals=self.block_duals.copy(),
            diff_duals=self.diff_duals.copy(),
            outer_iter=self.outer_iter,
        )


@dataclass
class PrecisionUpdate:
    """Result of one inner gradient-descent solve."""

    precision: np.ndarray
    grad_norm: float
    iterations: int
    objectives: list[float]
    logdet: float
    chol: np.ndarray = field(repr=False, default=None)


@dataclass
class FitResult:
    """Solution and convergence diagnostics of one solve."""

    precision: np.ndarray
    pair_blocks: np.ndarray
    converged: bool
    iterations: int
    trace: np.ndarray  # (iterations, 3): primal norm, dual norm, objective
    primal_norm: float
    dual_norm: float
    eps_primal: float
    eps_dual: float
    state: AdmmState = field(repr=False, default=None)

    @property
    def num_clusters_hint(self) -> int:
        return self.pair_blocks.shape[0]


def initial_state(sigma_hat: np.ndarray, fusion: FusionStructure, config: AdmmConfig) -> AdmmState:
    """Cold start: identity precision, matching pair copies, zero duals."""
    sigma_hat = require_symmetric(sigma_hat, "sigma_hat")
    if sigma_hat.shape[0] != fusion.p:
        raise ShapeMismatchError("sigma_hat dimension does not match fusion structure")
    p, m = fusion.p, fusion.num_pairs
    theta = np.eye(p)
    blocks = extract_all_pairs(theta, fusion)
    return AdmmState(
        fusion=fusion,
        precision=theta,
        pair_blocks=blocks,
        diffs=column_difference(blocks),
        block_duals=np.zeros((m, p - 2, 2)),
        diff_duals=np.zeros((m, p - 2)),
    )


# ---------------------------------------------------------------------------
# precision subproblem
# ---------------------------------------------------------------------------

def _scatter_pairs(blocks: np.ndarray, fusion: FusionStructure) -> np.ndarray:
    """Accumulate per-pair blocks back into a p x p matrix.

    Adds block column 1 at (complement rows, i) and column 2 at
    (complement rows, j) for every pair; the adjoint of pair extraction.
    """
    p = fusion.p
    if fusion.num_pairs == 0:
        return np.zeros((p, p))
    flat_i = (fusion.complement * p + fusion.pairs[:, 0, None]).ravel()
    flat_j = (fusion.complement * p + fusion.pairs[:, 1, None]).ravel()
    out = np.bincount(flat_i, weights=blocks[:, :, 0].ravel(), minlength=p * p)
    out += np.bincount(flat_j, weights=blocks[:, :, 1].ravel(), minlength=p * p)
    return out.reshape(p, p)


def _coupling(theta: np.ndarray, fusion: FusionStructure) -> np.ndarray:
    """Extraction followed by scatter, applied to theta, without forming blocks.

    Column c of the result is deg(c) * theta[:, c] with the diagonal entry
    zeroed and theta[d, c] removed for every fusion partner d of c.
    """
    out = theta * fusion.degrees[None, :]
    d = np.arange(fusion.p)
    out[d, d] = 0.0
    if fusion.num_pairs:
        ii, jj = fusion.pairs[:, 0], fusion.pairs[:, 1]
        out[jj, ii] -= theta[jj, ii]
        out[ii, jj] -= theta[ii, jj]
    return out


def precision_gradient(state: AdmmState, sigma_hat: np.ndarray, config: AdmmConfig) -> np.ndarray:
    """Gradient of the smooth precision subproblem, symmetrized.

    The raw matrix gradient is -theta^{-1} + sigma_hat plus the coupling
    terms from the pair constraints; it is projected onto the symmetric
    subspace as (G + G^T)/2 so iterates stay exactly symmetric.
    """
    theta = state.precision
    chol = cholesky_lower(theta, "precision iterate")
    inv = cho_solve((chol, True), np.eye(theta.shape[0]))
    resid = _scatter_pairs(state.block_duals - state.pair_blocks, state.fusion)
    raw = -inv + sigma_hat + config.rho1 * (_coupling(theta, state.fusion) + resid)
    return sym_part(raw)


def update_precision(state: AdmmState, sigma_hat: np.ndarray, config: AdmmConfig) -> PrecisionUpdate:
    """Solve the precision subproblem by backtracking gradient descent.

    Each step first backtracks past any candidate whose Cholesky fails (the
    log-determinant barrier does not prevent a finite step from leaving the
    PD cone) and then enforces the Armijo sufficient-decrease condition.
    Line search cost per trial is one Cholesky: the quadratic coupling terms
    are exact polynomials in the step size and are precomputed per step.
    """
    fusion = state.fusion
    p = fusion.p
    rho1 = config.rho1

    theta = state.precision
    chol = cholesky_lower(theta, "precision iterate")
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))

    # constant (within this subproblem) part of the coupling gradient
    lin = rho1 * _scatter_pairs(state.block_duals - state.pair_blocks, fusion)
    resid = extract_all_pairs(theta, fusion) - state.pair_blocks + state.block_duals

    trace_cur = float(np.sum(sigma_hat * theta))
    quad_cur = float(np.sum(resid * resid))
    f_cur = -logdet + trace_cur + 0.5 * rho1 * quad_cur
    objectives = [f_cur]

    grad_tol = config.inner_grad_tol * p
    grad_norm = np.inf
    steps = 0
    for j in range(config.inner_max_iters):
        inv = cho_solve((chol, True), np.eye(p))
        grad = sym_part(-inv + sigma_hat + rho1 * _coupling(theta, fusion) + lin)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= grad_tol:
            break

        grad_resid = extract_all_pairs(grad, fusion)
        trace_g = float(np.sum(sigma_hat * grad))
        q1 = float(np.sum(resid * grad_resid))
        q2 = float(np.sum(grad_resid * grad_resid))

        step = config.initial_step
        accepted = False
        while step >= _MIN_STEP:
            cand = theta - step * grad
            try:
                chol_c = np.linalg.cholesky(cand)
            except np.linalg.LinAlgError:
                step *= config.armijo_beta
                continue
            logdet_c = 2.0 * float(np.sum(np.log(np.diag(chol_c))))
            f_c = (
                -logdet_c
                + (trace_cur - step * trace_g)
                + 0.5 * rho1 * (quad_cur - 2.0 * step * q1 + step * step * q2)
            )
            if f_c <= f_cur - config.armijo_c * step * grad_norm**2:
                accepted = True
                break
            step *= config.armijo_beta
        if not accepted:
            raise LineSearchStalledError(
                f"line search stalled below step {_MIN_STEP:g} "
                f"(outer iteration {state.outer_iter + 1}, inner iteration {j + 1})",
                outer_iter=state.outer_iter + 1,
                inner_iter=j + 1,
            )

        theta = cand
        chol = chol_c
        logdet = logdet_c
        resid -= step * grad_resid
        # refresh scalars from the iterate to avoid recurrence drift
        trace_cur = float(np.sum(sigma_hat * theta))
        quad_cur = float(np.sum(resid * resid))
        f_cur = -logdet + trace_cur + 0.5 * rho1 * quad_cur
        objectives.append(f_cur)
        steps += 1
    else:
        # budget exhausted: report the gradient norm at the final iterate
        inv = cho_solve((chol, True), np.eye(p))
        grad = sym_part(-inv + sigma_hat + rho1 * _coupling(theta, fusion) + lin)
        grad_norm = float(np.linalg.norm(grad))

    return PrecisionUpdate(
        precision=theta,
        grad_norm=grad_norm,
        iterations=steps,
        objectives=objectives,
        logdet=logdet,
        chol=chol,
    )


# ---------------------------------------------------------------------------
# pair-block, difference, and dual updates
# ---------------------------------------------------------------------------

def update_pair_blocks(
    state: AdmmState,
    config: AdmmConfig,
    profiles: np.ndarray | None = None,
) -> np.ndarray:
    """Closed-form minimizer of every pair-block subproblem.

    For each pair the stationarity system has the 2x2 structure
    (1 + 2 r) I - r * ones, r = rho2/rho1, whose inverse is
    (I + r * ones) / (1 + 2 r); the update is one right-multiplication.
    ``profiles`` may pass a precomputed extraction of the current precision.
    """
    if profiles is None:
        profiles = extract_all_pairs(state.precision, state.fusion)
    r = config.rho2 / config.rho1
    rhs = profiles + state.block_duals
    rhs = rhs + (r * (state.diffs - state.diff_duals))[:, :, None] * _DIFF_SIGN
    right = (np.eye(2) + r * np.ones((2, 2))) / (1.0 + 2.0 * r)
    return rhs @ right


def group_prox(v: np.ndarray, threshold: float) -> np.ndarray:
    """Group soft-threshold: shrink ``v`` radially, zeroing it at or below
    the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= threshold:
        return np.zeros_like(v)
    return (1.0 - threshold / norm) * v


def update_diffs(state: AdmmState, config: AdmmConfig) -> np.ndarray:
    """Group soft-threshold of every pair's dual-shifted column difference."""
    v = column_difference(state.pair_blocks) + state.diff_duals
    if state.fusion.num_pairs == 0:
        return v
    thr = (config.lam / config.rho2) * state.fusion.weights
    norms = np.linalg.norm(v, axis=1)
    scale = np.zeros_like(norms)
    pos = norms > thr
    scale[pos] = 1.0 - thr[pos] / norms[pos]
    return v * scale[:, None]


def update_duals(
    state: AdmmState,
    profiles: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Dual ascent steps for both constraint families (exact residual adds)."""
    if profiles is None:
        profiles = extract_all_pairs(state.precision, state.fusion)
    new_block_duals = state.block_duals + (profiles - state.pair_blocks)
    new_diff_duals = state.diff_duals + (column_difference(state.pair_blocks) - state.diffs)
    return new_block_duals, new_diff_duals


# ---------------------------------------------------------------------------
# residuals and stopping
# ---------------------------------------------------------------------------

def _primal_norm(profiles, state) -> float:
    r1 = profiles - state.pair_blocks
    r2 = column_difference(state.pair_blocks) - state.diffs
    return float(np.sqrt(np.sum(r1 * r1) + np.sum(r2 * r2)))


def _dual_norm(state, prev_blocks, prev_diffs, config) -> float:
    s1 = state.pair_blocks - prev_blocks
    s2 = state.diffs - prev_diffs
    return float(
        np.sqrt(config.rho1**2 * np.sum(s1 * s1) + config.rho2**2 * np.sum(s2 * s2))
    )


def residuals(
    state_prev: AdmmState, state_curr: AdmmState, config: AdmmConfig
) -> tuple[float, float]:
    """Primal and dual residual norms between consecutive outer iterates.

    Primal: stacked constraint violations of both families.  Dual: the
    rho-weighted change of the pair blocks and difference copies.
    """
    profiles = extract_all_pairs(state_curr.precision, state_curr.fusion)
    primal = _primal_norm(profiles, state_curr)
    dual = _dual_norm(state_curr, state_prev.pair_blocks, state_prev.diffs, config)
    return primal, dual


def stopping_thresholds(state: AdmmState, config: AdmmConfig) -> tuple[float, float]:
    """Combined absolute/relative tolerances for primal and dual residuals."""
    profiles = extract_all_pairs(state.precision, state.fusion)
    return _thresholds(profiles, state, config)


def _thresholds(profiles, state, config) -> tuple[float, float]:
    m = state.fusion.num_pairs
    n_constraints = 3 * m * (state.fusion.p - 2)
    root = np.sqrt(n_constraints)
    lhs = np.sqrt(
        np.sum(profiles * profiles)
        + np.sum(column_difference(state.pair_blocks) ** 2)
    )
    rhs = np.sqrt(np.sum(state.pair_blocks**2) + np.sum(state.diffs**2))
    dual_scale = np.sqrt(
        config.rho1**2 * np.sum(state.block_duals**2)
        + config.rho2**2 * np.sum(state.diff_duals**2)
    )
    eps_pri = root * config.outer_tol_abs + config.outer_tol_rel * max(lhs, rhs)
    eps_dual = root * config.outer_tol_abs + config.outer_tol_rel * dual_scale
    return float(eps_pri), float(eps_dual)


# ---------------------------------------------------------------------------
# main loop
# ---------------------------------------------------------------------------

def fit(
    sigma_hat: np.ndarray,
    fusion: FusionStructure,
    config: AdmmConfig | None = None,
    warm_start: AdmmState | None = None,
    validate_iterates: bool = False,
) -> FitResult:
    """Run the full ADMM loop.

    Parameters
    ----------
    sigma_hat : ndarray (p, p)
        Empirical covariance (symmetric PSD).
    fusion : FusionStructure
        Penalized pairs and weights.
    config : AdmmConfig
        Solver parameters; defaults used when omitted.
    warm_start : AdmmState, optional
        Start from a previous solution (copied, not mutated) instead of the
        cold start; used for regularization paths.
    validate_iterates : bool
        Assert exact symmetry and positive definiteness of the precision at
        every outer iteration (testing aid; adds one Cholesky per iteration).

    Returns
    -------
    FitResult
        Non-convergence within the iteration budget is reported through
        ``converged=False``, not an exception.
    """
    if config is None:
        config = AdmmConfig()
    sigma_hat = require_symmetric(sigma_hat, "sigma_hat")
    if sigma_hat.shape[0] != fusion.p:
        raise ShapeMismatchError("sigma_hat dimension does not match fusion structure")

    if warm_start is not None:
        if warm_start.fusion.p != fusion.p:
            raise ShapeMismatchError("warm start dimension mismatch")
        state = warm_start.copy()
        state.fusion = fusion
        state.outer_iter = 0
    else:
        state = initial_state(sigma_hat, fusion, config)

    lam_w = config.lam * fusion.weights if fusion.num_pairs else None
    grad_tol = config.inner_grad_tol * fusion.p

    trace = []
    converged = False
    primal = dual = eps_pri = eps_dual = np.nan
    for _ in range(config.outer_max_iters):
        upd = update_precision(state, sigma_hat, config)
        state.precision = upd.precision

        profiles = extract_all_pairs(state.precision, fusion)
        prev_blocks, prev_diffs = state.pair_blocks, state.diffs
        state.pair_blocks = update_pair_blocks(state, config, profiles)
        state.diffs = update_diffs(state, config)
        state.block_duals, state.diff_duals = update_duals(state, profiles)
        state.outer_iter += 1

        primal = _primal_norm(profiles, state)
        dual = _dual_norm(state, prev_blocks, prev_diffs, config)
        eps_pri, eps_dual = _thresholds(profiles, state, config)

        objective = -upd.logdet + float(np.sum(sigma_hat * state.precision))
        if lam_w is not None:
            diffs_theta = column_difference(profiles)
            objective += float(np.dot(lam_w, np.linalg.norm(diffs_theta, axis=1)))
        trace.append((primal, dual, objective))

        if validate_iterates:
            assert np.array_equal(state.precision, state.precision.T)
            cholesky_lower(state.precision, "precision iterate")

        if primal <= eps_pri and dual <= eps_dual:
            if fusion.num_pairs > 0 or upd.grad_norm <= grad_tol:
                converged = True
                break

    return FitResult(
        precision=state.precision,
        pair_blocks=state.pair_blocks,
        converged=converged,
        iterations=state.outer_iter,
        trace=np.asarray(trace).reshape(-1, 3),
        primal_norm=float(primal),
        dual_norm=float(dual),
        eps_primal=float(eps_pri),
        eps_dual=float(eps_dual),
        state=state,
    )
