"""Regressor blocks built from covariates and Moran eigenvector bases.

Each varying-coefficient process contributes one block of columns: a
spatial block multiplies a covariate with the expanded spatial
eigenvectors, a temporal block with one time axis' eigenvectors, and an
interaction block with all spatial-by-temporal eigenvector products.
Interaction blocks are built lazily by the selection loop; at application
scale they are far too wide to materialize up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (
    DEFAULT_EIG_TOL,
    MoranBasis,
    PointSet,
    build_basis,
    expand_to_observations,
)
from .errors import ParameterError

MEAN = "mean"
SPATIAL_TERM = "spatial"
TEMPORAL_TERM = "temporal"
INTERACTION_TERM = "interaction"


@dataclass(frozen=True)
class Dataset:
    """Observations: response, covariates (first column all ones), axes."""

    y: np.ndarray
    X: np.ndarray
    coords: PointSet | None
    times: list[PointSet] = field(default_factory=list)
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ParameterError("X must be N x P with N matching y")
        if X.shape[1] < 1 or not np.allclose(X[:, 0], 1.0):
            raise ParameterError("first covariate column must be the intercept")
        if not self.names:
            object.__setattr__(
                self,
                "names",
                ["intercept"] + [f"x{p}" for p in range(1, X.shape[1])],
            )

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]

    @property
    def n_time_axes(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class TermSpec:
    """Identity of one latent process: covariate, kind, and time axis."""

    covariate: int
    kind: str
    axis: int | None = None

    def __post_init__(self):
        if self.kind not in (MEAN, SPATIAL_TERM, TEMPORAL_TERM, INTERACTION_TERM):
            raise ParameterError(f"unknown term kind {self.kind!r}")
        if self.kind in (TEMPORAL_TERM, INTERACTION_TERM) and self.axis is None:
            raise ParameterError(f"{self.kind} term needs a time axis index")

    def label(self, names: list[str] | None = None,
              axis_names: list[str] | None = None) -> str:
        cov = names[self.covariate] if names else f"x{self.covariate}"
        if self.kind in (TEMPORAL_TERM, INTERACTION_TERM):
            ax = axis_names[self.axis] if axis_names else f"t{self.axis}"
            tag = "time" if self.kind == TEMPORAL_TERM else "interact"
            return f"{cov}:{tag}({ax})"
        return f"{cov}:{self.kind}"


@dataclass(frozen=True)
class TermBlock:
    """Regressor columns of one term plus its prior eigenvalue profile."""

    spec: TermSpec
    Z: np.ndarray
    eigvals: np.ndarray

    def __post_init__(self):
        if self.Z.shape[1] != self.eigvals.size:
            raise ParameterError("eigenvalue profile length must match block width")

    @property
    def width(self) -> int:
        return self.Z.shape[1]


class ExpandedBases:
    """Bases expanded to observation rows, shared by all block builders."""

    def __init__(self, data: Dataset, spatial: MoranBasis | None,
                 temporals: list[MoranBasis]):
        self.spatial = spatial
        self.temporals = temporals
        self.spatial_rows = (
            expand_to_observations(spatial, data.coords.obs_index)
            if spatial is not None and not spatial.is_empty
            else None
        )
        self.temporal_rows = []
        for m, tb in enumerate(temporals):
            if tb is not None and not tb.is_empty:
                self.temporal_rows.append(
                    expand_to_observations(tb, data.times[m].obs_index)
                )
            else:
                self.temporal_rows.append(None)


def build_bases(data: Dataset, spatial_components: int | None = None,
                temporal_components: int | None = None,
                eig_tol: float = DEFAULT_EIG_TOL) -> ExpandedBases:
    """Build all bases for a dataset and expand them to observation rows."""
    spatial = (
        build_basis(data.coords, spatial_components, eig_tol)
        if data.coords is not None else None
    )
    temporals = [
        build_basis(ts, temporal_components, eig_tol) for ts in data.times
    ]
    return ExpandedBases(data, spatial, temporals)


def block_for_spec(data: Dataset, bases: ExpandedBases,
                   spec: TermSpec) -> TermBlock | None:
    """Regressor block for one term, or None when its basis is empty."""
    xp = data.X[:, spec.covariate]
    if spec.kind == SPATIAL_TERM:
        if bases.spatial_rows is None:
            return None
        return TermBlock(spec, xp[:, None] * bases.spatial_rows,
                         bases.spatial.eigvals.copy())
    if spec.kind == TEMPORAL_TERM:
        rows = bases.temporal_rows[spec.axis]
        if rows is None:
            return None
        return TermBlock(spec, xp[:, None] * rows,
                         bases.temporals[spec.axis].eigvals.copy())
    if spec.kind == INTERACTION_TERM:
        return build_interaction_block(data, bases, spec.covariate, spec.axis)
    raise ParameterError(f"no block for term kind {spec.kind!r}")


def build_main_blocks(data: Dataset, bases: ExpandedBases) -> list[TermBlock]:
    """Spatial and per-axis temporal blocks for every covariate.

    Covariate-major order, spatial before temporal axes. Blocks whose
    basis is empty are omitted; the caller sees the gap through the specs
    of the returned blocks.
    """
    blocks = []
    for p in range(data.n_covariates):
        xp = data.X[:, p]
        if bases.spatial_rows is not None:
            blocks.append(TermBlock(
                TermSpec(p, SPATIAL_TERM),
                xp[:, None] * bases.spatial_rows,
                bases.spatial.eigvals.copy(),
            ))
        for m, rows in enumerate(bases.temporal_rows):
            if rows is None:
                continue
            blocks.append(TermBlock(
                TermSpec(p, TEMPORAL_TERM, m),
                xp[:, None] * rows,
                bases.temporals[m].eigvals.copy(),
            ))
    return blocks


def build_interaction_block(data: Dataset, bases: ExpandedBases,
                            covariate: int, axis: int) -> TermBlock | None:
    """Space-time interaction block for one (covariate, axis) pair.

    Columns are ordered spatial-component-major: column ``ls * Lt + lt``
    is ``x_p * e_spatial[ls] * e_time[lt]`` with prior eigenvalue
    ``lam_spatial[ls] * lam_time[lt]``. Returns None when either basis is
    empty.
    """
    srows = bases.spatial_rows
    trows = bases.temporal_rows[axis]
    if srows is None or trows is None:
        return None
    xp = data.X[:, covariate]
    n = data.n_obs
    ls, lt = srows.shape[1], trows.shape[1]
    cols = (xp[:, None] * srows)[:, :, None] * trows[:, None, :]
    eig = np.outer(bases.spatial.eigvals, bases.temporals[axis].eigvals)
    return TermBlock(
        TermSpec(covariate, INTERACTION_TERM, axis),
        cols.reshape(n, ls * lt),
        eig.ravel(),
    )


def enumerate_interaction_candidates(n_covariates: int,
                                     n_axes: int) -> list[tuple[int, int]]:
    """All (covariate, axis) interaction candidates, covariate-major."""
    if n_covariates < 1:
        raise ParameterError("need at least one covariate")
    return [(p, m) for p in range(n_covariates) for m in range(n_axes)]


def count_columns(n_covariates: int, n_spatial: int,
                  n_temporal: list[int]) -> tuple[int, int]:
    """(non-interaction, interaction) regressor column counts.

    Non-interaction: P + P*(Ls + sum Lt); interaction: P * Ls * sum Lt.
    """
    total_t = int(sum(n_temporal))
    main = n_covariates + n_covariates * (n_spatial + total_t)
    interaction = n_covariates * n_spatial * total_t
    return main, interaction
