"""Shared dense linear-algebra helpers.

All symmetric positive-definite factorizations in the package go through
:func:`spd_factor` so that tests can instrument how large the factored
matrices are (the incremental update path must never re-factor the full
system while fitting a candidate term).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import scipy.linalg as sla

from .errors import NumericalFailureError

_factored_dims: list[int] | None = None


@contextmanager
def record_factorizations():
    """Record the dimension of every SPD factorization inside the block.

    Yields the list that accumulates dimensions; reentrant use is not
    supported.
    """
    global _factored_dims
    prev = _factored_dims
    _factored_dims = []
    try:
        yield _factored_dims
    finally:
        _factored_dims = prev


def spd_factor(a: np.ndarray):
    """Cholesky-factor a symmetric positive-definite matrix.

    Returns the (lower, True) pair consumed by :func:`spd_solve` /
    :func:`spd_logdet`. Raises :class:`NumericalFailureError` when the
    matrix is not positive definite.
    """
    if _factored_dims is not None:
        _factored_dims.append(a.shape[0])
    try:
        c = sla.cho_factor(a, lower=True, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"matrix not positive definite: {exc}") from exc
    return c


def spd_solve(factor, b: np.ndarray) -> np.ndarray:
    return sla.cho_solve(factor, b, check_finite=False)


def spd_logdet(factor) -> float:
    """log-determinant from a factor produced by :func:`spd_factor`."""
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def spd_inverse(a: np.ndarray) -> np.ndarray:
    """Dense inverse of an SPD matrix, symmetrized against round-off."""
    c = spd_factor(a)
    inv = spd_solve(c, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)
