"""Moran eigenvector bases over spatial, linear-time, and cyclic-time axes.

A basis is built in four steps: pairwise distances over the unique points
of an axis, a kernel range taken from the longest minimum-spanning-tree
edge, an exponential kernel with zero diagonal, and the positive
eigenpairs of the doubly-centered kernel. Eigenvalues are stored divided
by the largest one so that later powers ``eigval**alpha`` stay bounded;
the raw scale is kept for out-of-sample extension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from .errors import DegenerateAxisError, ParameterError

SPATIAL = "spatial"
TEMPORAL_LINEAR = "temporal-linear"
TEMPORAL_CYCLIC = "temporal-cyclic"

DEFAULT_SPATIAL_COMPONENTS = 200
DEFAULT_TEMPORAL_COMPONENTS = 100
DEFAULT_EIG_TOL = 1e-8


@dataclass(frozen=True)
class PointSet:
    """Unique coordinates of one axis plus the observation-to-point map.

    ``points`` has shape (n_unique, 2) for spatial axes and (n_unique, 1)
    for temporal ones. ``obs_index[i]`` is the row of ``points`` that
    observation ``i`` sits on. Cyclic axes store positions reduced modulo
    the period, so two timestamps one full period apart share a point.
    """

    points: np.ndarray
    obs_index: np.ndarray
    axis_kind: str
    period: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.axis_kind not in (SPATIAL, TEMPORAL_LINEAR, TEMPORAL_CYCLIC):
            raise ParameterError(f"unknown axis kind {self.axis_kind!r}")
        if self.axis_kind == TEMPORAL_CYCLIC:
            if self.period is None or self.period <= 0:
                raise ParameterError("cyclic axis requires a positive period")
        if self.obs_index.size and (
            self.obs_index.min() < 0 or self.obs_index.max() >= len(self.points)
        ):
            raise ParameterError("obs_index refers to rows outside points")

    @property
    def n_unique(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_coords(
        cls,
        values: np.ndarray,
        axis_kind: str,
        period: float | None = None,
        name: str = "",
    ) -> "PointSet":
        """Deduplicate raw per-observation coordinates into a PointSet."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if axis_kind == TEMPORAL_CYCLIC:
            if period is None or period <= 0:
                raise ParameterError("cyclic axis requires a positive period")
            values = np.mod(values, period)
        unique, inverse = np.unique(values, axis=0, return_inverse=True)
        return cls(unique, inverse.ravel(), axis_kind, period, name)


@dataclass(frozen=True)
class MoranBasis:
    """Positive eigenpairs of a doubly-centered kernel over unique points.

    ``eigvals`` is descending and normalized to ``eigvals[0] == 1``;
    ``eigval_scale`` is the raw largest eigenvalue. ``kernel_colmeans``
    holds the column means of the training kernel, needed by
    :func:`extend_to_points`.
    """

    eigvecs: np.ndarray
    eigvals: np.ndarray
    kernel_range: float
    axis_kind: str
    period: float | None = None
    name: str = ""
    eigval_scale: float = 0.0
    points: np.ndarray | None = None
    kernel_colmeans: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return self.eigvecs.shape[1]

    @property
    def is_empty(self) -> bool:
        return self.n_components == 0


def cross_distance(a: np.ndarray, b: np.ndarray, axis_kind: str,
                   period: float | None = None) -> np.ndarray:
    """Distances between two point arrays under the axis metric."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if axis_kind == SPATIAL:
        return cdist(a, b)
    delta = np.abs(a[:, 0][:, None] - b[:, 0][None, :])
    if axis_kind == TEMPORAL_LINEAR:
        return delta
    if period is None or period <= 0:
        raise ParameterError("cyclic distance requires a positive period")
    wrapped = np.mod(delta, period)
    return np.minimum(wrapped, period - wrapped)


def pairwise_distance(points: PointSet) -> np.ndarray:
    """Symmetric zero-diagonal distance matrix over the unique points."""
    if points.n_unique < 2:
        raise DegenerateAxisError(
            f"axis {points.name or points.axis_kind!r} has "
            f"{points.n_unique} unique point(s); need at least 2"
        )
    dist = cross_distance(points.points, points.points,
                          points.axis_kind, points.period)
    np.fill_diagonal(dist, 0.0)
    return dist


def mst_longest_edge(dist: np.ndarray) -> float:
    """Longest edge weight of a minimum spanning tree of the dense graph.

    Ties between spanning trees do not matter: every minimum spanning
    tree has the same sorted edge-weight multiset.
    """
    n = dist.shape[0]
    if n < 2:
        raise DegenerateAxisError("minimum spanning tree needs at least 2 points")
    tree = minimum_spanning_tree(dist)
    return float(tree.data.max())


def kernel_matrix(dist: np.ndarray, kernel_range: float) -> np.ndarray:
    """Exponential kernel exp(-d/range) with the diagonal forced to zero."""
    if kernel_range <= 0:
        raise ParameterError(f"kernel range must be positive, got {kernel_range}")
    kernel = np.exp(-dist / kernel_range)
    np.fill_diagonal(kernel, 0.0)
    return kernel


def _fix_signs(eigvecs: np.ndarray) -> np.ndarray:
    """Flip column signs so the largest-magnitude entry is positive."""
    if eigvecs.shape[1] == 0:
        return eigvecs
    anchor = np.abs(eigvecs).argmax(axis=0)
    signs = np.sign(eigvecs[anchor, np.arange(eigvecs.shape[1])])
    signs[signs == 0] = 1.0
    return eigvecs * signs


def extract_basis(
    kernel: np.ndarray,
    max_components: int,
    eig_tol: float = DEFAULT_EIG_TOL,
    *,
    kernel_range: float = 1.0,
    axis_kind: str = SPATIAL,
    period: float | None = None,
    name: str = "",
    points: np.ndarray | None = None,
) -> MoranBasis:
    """Eigenpairs of the doubly-centered kernel, largest first.

    Retains eigenpairs with eigenvalue above ``eig_tol`` times the largest
    one, capped at ``max_components``. Returns an empty basis when no
    eigenvalue is positive; callers skip terms with empty bases.
    """
    n = kernel.shape[0]
    colmeans = kernel.mean(axis=0)
    centered = kernel - colmeans[:, None] - colmeans[None, :] + colmeans.mean()
    evals, evecs = np.linalg.eigh(0.5 * (centered + centered.T))
    top = evals[-1]
    if top <= 0.0:
        return MoranBasis(
            np.empty((n, 0)), np.empty(0), kernel_range, axis_kind,
            period, name, 0.0, points, colmeans,
        )
    keep = np.flatnonzero(evals > eig_tol * top)[::-1]
    keep = keep[: int(max_components)]
    eigvals = evals[keep]
    eigvecs = _fix_signs(evecs[:, keep])
    return MoranBasis(
        eigvecs, eigvals / top, kernel_range, axis_kind,
        period, name, float(top), points, colmeans,
    )


def build_basis(
    point_set: PointSet,
    max_components: int | None = None,
    eig_tol: float = DEFAULT_EIG_TOL,
) -> MoranBasis:
    """Full basis pipeline for one axis: distances, range, kernel, eigenpairs."""
    if max_components is None:
        max_components = (
            DEFAULT_SPATIAL_COMPONENTS
            if point_set.axis_kind == SPATIAL
            else DEFAULT_TEMPORAL_COMPONENTS
        )
    dist = pairwise_distance(point_set)
    kernel_range = mst_longest_edge(dist)
    kernel = kernel_matrix(dist, kernel_range)
    return extract_basis(
        kernel,
        max_components,
        eig_tol,
        kernel_range=kernel_range,
        axis_kind=point_set.axis_kind,
        period=point_set.period,
        name=point_set.name,
        points=point_set.points,
    )


def expand_to_observations(basis: MoranBasis, obs_index: np.ndarray) -> np.ndarray:
    """Per-observation eigenvector rows: row i is eigvecs[obs_index[i]]."""
    return basis.eigvecs[obs_index]


def extend_to_points(basis: MoranBasis, new_points: np.ndarray) -> np.ndarray:
    """Eigenvector values at points outside the training set.

    Exact training points reuse their stored rows; other points get the
    kernel-projection extension c' E / lambda with c the centered cross
    kernel against the training points.
    """
    if basis.points is None or basis.kernel_colmeans is None:
        raise ParameterError("basis was built without training-point metadata")
    new_points = np.asarray(new_points, dtype=float)
    if new_points.ndim == 1:
        new_points = new_points[:, None]
    if basis.axis_kind == TEMPORAL_CYCLIC:
        new_points = np.mod(new_points, basis.period)
    dist = cross_distance(new_points, basis.points, basis.axis_kind, basis.period)
    out = np.empty((new_points.shape[0], basis.n_components))
    raw_evals = basis.eigvals * basis.eigval_scale
    exact = dist.min(axis=1) == 0.0
    if exact.any():
        out[exact] = basis.eigvecs[dist[exact].argmin(axis=1)]
    rest = ~exact
    if rest.any():
        cross = np.exp(-dist[rest] / basis.kernel_range) - basis.kernel_colmeans
        out[rest] = (cross @ basis.eigvecs) / raw_evals
    return out
