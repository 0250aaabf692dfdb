"""Profiled marginal likelihood of the basis-function mixed model.

All variance parameters live on the profiled scale: ``tau2`` is the ratio
of process variance to noise variance, so the scaled regressors
``Z * sqrt(tau2 * eigval**alpha)`` are noise-normalized and the noise
variance drops out of the block system. It is recovered afterwards as
``d / (N - P)``. The log-likelihood is the restricted (residual) form
with the noise variance profiled out.

This module evaluates everything densely in one shot; the incremental
per-candidate path lives in :mod:`stvc.select` and must agree with it to
numerical precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .design import TermBlock
from .errors import NumericalFailureError, SingularDesignError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class VarianceParams:
    """One term's variance ratio and smoothness exponent."""

    tau2: float
    alpha: float

    def __post_init__(self):
        if self.tau2 < 0:
            raise ValueError("tau2 must be nonnegative")


@dataclass
class ModelTerms:
    """Fixed-effect matrix plus the ordered random-term blocks."""

    X: np.ndarray
    blocks: list[tuple[TermBlock, VarianceParams]]

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_fixed(self) -> int:
        return self.X.shape[1]


@dataclass
class LikelihoodState:
    """Everything produced by one profiled-likelihood evaluation."""

    H: np.ndarray
    H_inv: np.ndarray | None
    logdet_h: float
    b_hat: np.ndarray
    u_hat: np.ndarray
    gamma_hat: list[np.ndarray]
    d: float
    loglik: float
    sigma2_hat: float


def variance_diag(block: TermBlock, params: VarianceParams) -> np.ndarray:
    """Prior variance profile tau2 * eigval**alpha for one block."""
    return params.tau2 * block.eigvals ** params.alpha


def scaled_columns(block: TermBlock, params: VarianceParams) -> np.ndarray:
    """Block columns scaled by the square root of the prior variances."""
    return block.Z * np.sqrt(variance_diag(block, params))


def g_block(block_k: TermBlock, block_k2: TermBlock,
            params_k: VarianceParams, params_k2: VarianceParams) -> np.ndarray:
    """Variance-scaled cross product V_k^1/2 (Z_k' Z_k') V_k'^1/2."""
    sv_k = np.sqrt(variance_diag(block_k, params_k))
    sv_k2 = np.sqrt(variance_diag(block_k2, params_k2))
    return sv_k[:, None] * (block_k.Z.T @ block_k2.Z) * sv_k2[None, :]


def assemble_H(terms: ModelTerms) -> np.ndarray:
    """Dense block system matrix: X'X bordered by the scaled cross products."""
    xtx = terms.X.T @ terms.X
    try:
        linalg.spd_factor(xtx)
    except NumericalFailureError as exc:
        raise SingularDesignError("fixed-effect matrix is rank deficient") from exc
    cols = [terms.X] + [scaled_columns(b, p) for b, p in terms.blocks]
    a = np.concatenate(cols, axis=1) if len(cols) > 1 else terms.X
    h = a.T @ a
    h[terms.n_fixed:, terms.n_fixed:] += np.eye(h.shape[0] - terms.n_fixed)
    return linalg.symmetrize(h)


def loglik_from_parts(logdet_h: float, d: float, n_obs: int, n_fixed: int) -> float:
    """Profiled restricted log-likelihood from log|H| and the penalized residual."""
    dof = n_obs - n_fixed
    if not np.isfinite(d) or d <= 0.0:
        raise NumericalFailureError(
            f"penalized residual d={d}; perfect or invalid fit has no likelihood"
        )
    return -0.5 * logdet_h - 0.5 * dof * (1.0 + LOG_2PI + np.log(d / dof))


def profile_loglik(terms: ModelTerms, y: np.ndarray,
                   want_inverse: bool = True) -> LikelihoodState:
    """Solve the block system and evaluate the profiled log-likelihood.

    Returns estimates for the fixed effects, the whitened random effects,
    and the per-block random coefficients, together with the profiled
    noise variance ``d / (N - P)``.
    """
    y = np.asarray(y, dtype=float).ravel()
    n, p = terms.n_obs, terms.n_fixed
    if n <= p:
        raise NumericalFailureError("need more observations than fixed effects")
    scaled = [scaled_columns(b, prm) for b, prm in terms.blocks]
    a = np.concatenate([terms.X] + scaled, axis=1) if scaled else terms.X
    h = a.T @ a
    h[p:, p:] += np.eye(h.shape[0] - p)
    h = linalg.symmetrize(h)
    try:
        factor = linalg.spd_factor(h)
    except NumericalFailureError:
        if not terms.blocks:
            raise SingularDesignError("fixed-effect matrix is rank deficient")
        raise
    logdet_h = linalg.spd_logdet(factor)
    r = a.T @ y
    c = linalg.spd_solve(factor, r)
    d = float(y @ y - c @ r)
    loglik = loglik_from_parts(logdet_h, d, n, p)
    b_hat = c[:p]
    u_hat = c[p:]
    gamma_hat = []
    offset = 0
    for block, prm in terms.blocks:
        w = block.width
        gamma_hat.append(np.sqrt(variance_diag(block, prm)) * u_hat[offset:offset + w])
        offset += w
    h_inv = linalg.spd_solve(factor, np.eye(h.shape[0])) if want_inverse else None
    return LikelihoodState(
        H=h, H_inv=h_inv, logdet_h=logdet_h, b_hat=b_hat, u_hat=u_hat,
        gamma_hat=gamma_hat, d=d, loglik=loglik, sigma2_hat=d / (n - p),
    )


def bic(state_or_loglik, n_variance_pairs: int, n_obs: int, n_fixed: int) -> float:
    """Bayesian information criterion of a fitted model.

    The parameter count is the fixed effects, two per variance pair
    (variance ratio and smoothness), and one noise variance.
    """
    loglik = getattr(state_or_loglik, "loglik", state_or_loglik)
    k = n_fixed + 2 * n_variance_pairs + 1
    return -2.0 * loglik + k * np.log(n_obs)
