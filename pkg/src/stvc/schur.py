"""Incremental bordered-system updates.

Appending a block of columns to the symmetric system H produces

    [[H,        G_cross],
     [G_cross', G_new  ]]

whose inverse and determinant follow from the Schur complement
Q = G_new - G_cross' H^-1 G_cross of the existing part. A
:class:`BlockCache` carries the running inverse and log-determinant,
so trying or committing a block costs a factorization of the block
width only; the full system is never refactored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import NumericalFailureError


@dataclass
class BlockCache:
    """Running inverse and log-determinant of the growing system."""

    H_inv: np.ndarray
    logdetH: float

    @property
    def dim(self) -> int:
        return self.H_inv.shape[0]

    @classmethod
    def from_dense(cls, h: np.ndarray) -> "BlockCache":
        factor = linalg.spd_factor(h)
        return cls(H_inv=linalg.spd_inverse(h), logdetH=linalg.spd_logdet(factor))


def schur_complement(cache: BlockCache, g_cross: np.ndarray,
                     g_new: np.ndarray) -> np.ndarray:
    """Complement Q = G_new - G_cross' H^-1 G_cross of the cached system.

    Explicitly symmetrized; roundoff in H_inv otherwise leaks into the
    factorization. A non-positive-definite result means the bordered
    system is numerically singular at these parameters, which callers
    treat as a rejected candidate rather than an error.
    """
    q = g_new - g_cross.T @ (cache.H_inv @ g_cross)
    return linalg.symmetrize(q)


def try_factor(q: np.ndarray):
    """Cholesky factor of a complement, or None if it is not positive."""
    try:
        return linalg.spd_factor(q)
    except NumericalFailureError:
        return None


def logdet_update(cache: BlockCache, q: np.ndarray, q_factor=None) -> float:
    """Log-determinant of the bordered system: logdetH + log|Q|."""
    if q_factor is None:
        q_factor = linalg.spd_factor(q)
    return cache.logdetH + linalg.spd_logdet(q_factor)


def bordered_inverse(cache: BlockCache, g_cross: np.ndarray,
                     q: np.ndarray, q_factor=None) -> np.ndarray:
    """Inverse of the bordered system assembled from its Schur pieces."""
    if q_factor is None:
        q_factor = linalg.spd_factor(q)
    w = g_cross.shape[1]
    n = cache.dim
    q_inv = linalg.spd_solve(q_factor, np.eye(w))
    wmat = cache.H_inv @ g_cross
    out = np.empty((n + w, n + w))
    out[:n, :n] = cache.H_inv + wmat @ q_inv @ wmat.T
    out[:n, n:] = -wmat @ q_inv
    out[n:, :n] = out[:n, n:].T
    out[n:, n:] = q_inv
    return linalg.symmetrize(out)


def commit_append(cache: BlockCache, g_cross: np.ndarray, g_new: np.ndarray,
                  q: np.ndarray | None = None) -> BlockCache:
    """Cache for the system with the block appended.

    ``q`` may be passed in when the caller already formed the
    complement; otherwise it is recomputed here. Raises
    :class:`NumericalFailureError` if the complement is not positive
    definite, since a committed block must leave the system invertible.
    """
    if q is None:
        q = schur_complement(cache, g_cross, g_new)
    q_factor = linalg.spd_factor(q)
    return BlockCache(
        H_inv=bordered_inverse(cache, g_cross, q, q_factor),
        logdetH=logdet_update(cache, q, q_factor),
    )


def solution_append(c_base: np.ndarray, r_new: np.ndarray,
                    g_cross: np.ndarray, q_factor,
                    h_inv: np.ndarray) -> np.ndarray:
    """Solution of the bordered system from the base solution.

    ``c_base`` solves H c = r over the existing columns and ``r_new``
    is the right-hand side for the appended ones. The appended part
    solves Q c_new = r_new - G_cross' c_base and the base part picks
    up the correction -H^-1 G_cross c_new.
    """
    c_new = linalg.spd_solve(q_factor, r_new - g_cross.T @ c_base)
    c_top = c_base - h_inv @ (g_cross @ c_new)
    return np.concatenate([c_top, c_new])
