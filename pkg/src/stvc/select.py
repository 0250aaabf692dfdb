"""Forward model construction with incremental block updates.

The model grows one term at a time. Main-effect groups (spatial and
per-axis temporal, per covariate) are added first in best-BIC order;
space-time interactions are then admitted reluctantly, each sweep
fitting every remaining candidate's two variance parameters against
the frozen current model and accepting the single best candidate only
if it improves the BIC.

Two engines drive the same loops. :class:`IncrementalModel` keeps the
inverse and log-determinant of the block system current through
Schur-complement updates, so evaluating a candidate only ever factors
matrices of that candidate's width. :class:`NaiveModel` reassembles
and densely factors the full system at every objective evaluation; it
exists as a correctness oracle and a timing baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg, schur
from .design import (
    INTERACTION_TERM,
    SPATIAL_TERM,
    TEMPORAL_TERM,
    Dataset,
    ExpandedBases,
    TermBlock,
    TermSpec,
    block_for_spec,
    build_bases,
    build_interaction_block,
    build_main_blocks,
    enumerate_interaction_candidates,
)
from .errors import (
    NumericalFailureError,
    ParameterError,
    SingularDesignError,
    TermUnfittableError,
)
from .likelihood import (
    VarianceParams,
    bic,
    loglik_from_parts,
    variance_diag,
)
from .optimize import OptConfig, maximize_term


@dataclass(frozen=True)
class FitConfig:
    """Settings shared by the selection loops."""

    optimizer: OptConfig = field(default_factory=OptConfig)
    bic_tol: float = 1e-6
    fit_interactions: bool = True


class IncrementalModel:
    """Committed model state with Schur-updated inverse and determinant.

    Holds the scaled regressor matrix of everything committed so far,
    the running solution of the block system, and a
    :class:`~stvc.schur.BlockCache` with its inverse and
    log-determinant. Candidate evaluation happens through
    :class:`CandidateEvaluator`, which precomputes the candidate's
    cross products once and then prices any variance parameter value
    with factorizations of the candidate width only.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ParameterError("X must be N x P with N matching y")
        if X.shape[0] <= X.shape[1]:
            raise ParameterError("need more observations than fixed effects")
        self.X = X
        self.y = y
        self.n_obs, self.n_fixed = X.shape
        self.yty = float(y @ y)
        try:
            factor = linalg.spd_factor(linalg.symmetrize(X.T @ X))
        except NumericalFailureError as exc:
            raise SingularDesignError(
                "fixed-effect matrix is rank deficient"
            ) from exc
        self.cache = schur.BlockCache(
            H_inv=linalg.spd_solve(factor, np.eye(self.n_fixed)),
            logdetH=linalg.spd_logdet(factor),
        )
        self.A = X
        self.r = X.T @ y
        self.c = linalg.spd_solve(factor, self.r)
        self.d = float(self.yty - self.c @ self.r)
        self.blocks: list[tuple[TermBlock, VarianceParams]] = []
        self.version = 0

    @property
    def dim(self) -> int:
        return self.cache.dim

    @property
    def loglik(self) -> float:
        return loglik_from_parts(self.cache.logdetH, self.d,
                                 self.n_obs, self.n_fixed)

    def evaluator(self, block: TermBlock) -> "CandidateEvaluator":
        return CandidateEvaluator(self, block)

    def commit(self, block: TermBlock, params: VarianceParams,
               evaluator: "CandidateEvaluator | None" = None):
        """Append a term at fixed variance parameters.

        Reuses the evaluator's cached cross products when one is
        supplied and still current. Raises
        :class:`NumericalFailureError` if the appended system is not
        positive definite, since committing must leave it invertible.
        """
        if evaluator is not None and (
            evaluator.block is not block or evaluator.version != self.version
        ):
            evaluator = None
        if evaluator is None:
            evaluator = CandidateEvaluator(self, block)
        sv = np.sqrt(variance_diag(block, params))
        g_cross = evaluator.C_cross * sv[None, :]
        q = linalg.symmetrize(sv[:, None] * sv[None, :] * evaluator.S)
        q[np.diag_indices_from(q)] += 1.0
        q_factor = linalg.spd_factor(q)
        r_new = sv * evaluator.c_y
        self.c = schur.solution_append(self.c, r_new, g_cross, q_factor,
                                       self.cache.H_inv)
        self.cache = schur.BlockCache(
            H_inv=schur.bordered_inverse(self.cache, g_cross, q, q_factor),
            logdetH=schur.logdet_update(self.cache, q, q_factor),
        )
        self.A = np.concatenate([self.A, block.Z * sv[None, :]], axis=1)
        self.r = np.concatenate([self.r, r_new])
        self.d = float(self.yty - self.c @ self.r)
        self.blocks.append((block, params))
        self.version += 1

    def final_state(self):
        """(b_hat, per-block gamma_hat, sigma2_hat, loglik) of the model."""
        b_hat = self.c[:self.n_fixed].copy()
        gammas = []
        offset = self.n_fixed
        for block, params in self.blocks:
            sv = np.sqrt(variance_diag(block, params))
            gammas.append(sv * self.c[offset:offset + block.width])
            offset += block.width
        sigma2 = self.d / (self.n_obs - self.n_fixed)
        return b_hat, gammas, sigma2, self.loglik


class CandidateEvaluator:
    """Prices one candidate block against a frozen base model.

    Construction pays the cross products with the committed columns
    once. After that, each variance parameter value costs one
    factorization of the candidate width: the Schur complement is
    Q = (sv sv') * S + I with S precomputed, and the penalized
    residual shrinks by g' Q^-1 g with g = sv * h0.
    """

    def __init__(self, engine: IncrementalModel, block: TermBlock):
        self.engine = engine
        self.block = block
        self.version = engine.version
        z = block.Z
        self.C_self = linalg.symmetrize(z.T @ z)
        self.C_cross = engine.A.T @ z
        self.c_y = z.T @ engine.y
        w0 = engine.cache.H_inv @ self.C_cross
        self.S = linalg.symmetrize(self.C_self - self.C_cross.T @ w0)
        self.h0 = self.c_y - self.C_cross.T @ engine.c

    def loglik(self, params: VarianceParams) -> float:
        if self.version != self.engine.version:
            raise RuntimeError(
                "evaluator is stale: the base model changed after it was built"
            )
        sv = np.sqrt(variance_diag(self.block, params))
        q = linalg.symmetrize(sv[:, None] * sv[None, :] * self.S)
        q[np.diag_indices_from(q)] += 1.0
        q_factor = schur.try_factor(q)
        if q_factor is None:
            raise NumericalFailureError(
                "appended system not positive definite", params=params
            )
        g = sv * self.h0
        d_new = self.engine.d - float(g @ linalg.spd_solve(q_factor, g))
        logdet = self.engine.cache.logdetH + linalg.spd_logdet(q_factor)
        return loglik_from_parts(logdet, d_new,
                                 self.engine.n_obs, self.engine.n_fixed)

    def objective(self, log_tau2: float, alpha: float) -> float:
        return self.loglik(VarianceParams(float(np.exp(log_tau2)), alpha))


class NaiveModel:
    """Reference engine that refactors the dense system per evaluation.

    Raw cross products between registered blocks are cached, but every
    objective evaluation rebuilds the full scaled system and factors
    it at full dimension. Selection driven by this engine must agree
    with the incremental engine to numerical precision; its cost is
    the baseline the incremental updates are measured against.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ParameterError("X must be N x P with N matching y")
        self.X = X
        self.y = y
        self.n_obs, self.n_fixed = X.shape
        self.yty = float(y @ y)
        self.xtx = linalg.symmetrize(X.T @ X)
        try:
            linalg.spd_factor(self.xtx)
        except NumericalFailureError as exc:
            raise SingularDesignError(
                "fixed-effect matrix is rank deficient"
            ) from exc
        self.xty = X.T @ y
        self._registry: list[TermBlock] = []
        self._xtz: list[np.ndarray] = []
        self._zty: list[np.ndarray] = []
        self._ztz: dict[tuple[int, int], np.ndarray] = {}
        self._committed: list[tuple[int, VarianceParams]] = []
        self.blocks: list[tuple[TermBlock, VarianceParams]] = []
        self.version = 0

    def _register(self, block: TermBlock) -> int:
        for i, existing in enumerate(self._registry):
            if existing is block:
                return i
        i = len(self._registry)
        self._registry.append(block)
        self._xtz.append(self.X.T @ block.Z)
        self._zty.append(block.Z.T @ self.y)
        for j in range(i + 1):
            self._ztz[(j, i)] = self._registry[j].Z.T @ block.Z
        return i

    def _gram(self, i: int, j: int) -> np.ndarray:
        if (i, j) in self._ztz:
            return self._ztz[(i, j)]
        return self._ztz[(j, i)].T

    def _evaluate(self, combo: list[tuple[int, VarianceParams]]):
        p = self.n_fixed
        widths = [self._registry[i].width for i, _ in combo]
        dim = p + sum(widths)
        offsets = np.concatenate([[p], p + np.cumsum(widths)]).astype(int)
        h = np.zeros((dim, dim))
        r = np.empty(dim)
        h[:p, :p] = self.xtx
        r[:p] = self.xty
        svs = []
        for a, (ia, pa) in enumerate(combo):
            sv = np.sqrt(variance_diag(self._registry[ia], pa))
            svs.append(sv)
            lo, hi = offsets[a], offsets[a + 1]
            h[:p, lo:hi] = self._xtz[ia] * sv[None, :]
            h[lo:hi, :p] = h[:p, lo:hi].T
            r[lo:hi] = sv * self._zty[ia]
            for b in range(a + 1):
                ib = combo[b][0]
                lob, hib = offsets[b], offsets[b + 1]
                cross = svs[b][:, None] * self._gram(ib, ia) * sv[None, :]
                h[lob:hib, lo:hi] = cross
                h[lo:hi, lob:hib] = cross.T
            h[lo:hi, lo:hi][np.diag_indices(hi - lo)] += 1.0
        h = linalg.symmetrize(h)
        factor = linalg.spd_factor(h)
        logdet = linalg.spd_logdet(factor)
        c = linalg.spd_solve(factor, r)
        d = float(self.yty - c @ r)
        loglik = loglik_from_parts(logdet, d, self.n_obs, self.n_fixed)
        return loglik, c, d, offsets, svs

    @property
    def loglik(self) -> float:
        return self._evaluate(self._committed)[0]

    def evaluator(self, block: TermBlock) -> "_NaiveEvaluator":
        return _NaiveEvaluator(self, self._register(block), block)

    def commit(self, block: TermBlock, params: VarianceParams,
               evaluator=None):
        idx = self._register(block)
        self._evaluate(self._committed + [(idx, params)])
        self._committed.append((idx, params))
        self.blocks.append((block, params))
        self.version += 1

    def final_state(self):
        loglik, c, d, offsets, svs = self._evaluate(self._committed)
        b_hat = c[:self.n_fixed].copy()
        gammas = [
            svs[a] * c[offsets[a]:offsets[a + 1]]
            for a in range(len(self._committed))
        ]
        sigma2 = d / (self.n_obs - self.n_fixed)
        return b_hat, gammas, sigma2, loglik


class _NaiveEvaluator:
    def __init__(self, engine: NaiveModel, idx: int, block: TermBlock):
        self.engine = engine
        self.idx = idx
        self.block = block
        self.version = engine.version

    def loglik(self, params: VarianceParams) -> float:
        if self.version != self.engine.version:
            raise RuntimeError(
                "evaluator is stale: the base model changed after it was built"
            )
        combo = self.engine._committed + [(self.idx, params)]
        return self.engine._evaluate(combo)[0]

    def objective(self, log_tau2: float, alpha: float) -> float:
        return self.loglik(VarianceParams(float(np.exp(log_tau2)), alpha))


@dataclass
class SelectionRecord:
    """One candidate evaluation or acceptance in the selection log."""

    phase: str
    spec: TermSpec
    accepted: bool
    loglik: float
    bic: float
    params: VarianceParams | None
    wall_ms: float
    n_evals: int = 0


@dataclass
class SelectionState:
    """Running state of the forward procedure."""

    engine: object
    selected: list[tuple[TermSpec, VarianceParams]]
    remaining: list[tuple[int, int]]
    best_bic: float
    history: list[SelectionRecord]
    bic_trajectory: list[float]

    @property
    def cache(self):
        return getattr(self.engine, "cache", None)


class _Candidate:
    """Candidate term with a lazily built regressor block."""

    def __init__(self, spec: TermSpec, build):
        self.spec = spec
        self._build = build
        self._block: TermBlock | None = None

    def block(self) -> TermBlock:
        if self._block is None:
            self._block = self._build()
        return self._block


def _forward_pass(engine, candidates: list[_Candidate], config: FitConfig,
                  state: SelectionState, phase: str):
    """Accept best-BIC candidates from the list until none improves.

    Mutates ``candidates`` (accepted entries are removed) and
    ``state``. Candidates whose optimization fails stay in the list:
    their context changes as other terms are added, so a later sweep
    may still fit them.
    """
    while candidates:
        best_idx = -1
        best_bic_val = np.inf
        best_res = None
        best_ev = None
        for idx, cand in enumerate(candidates):
            started = time.perf_counter()
            ev = engine.evaluator(cand.block())
            try:
                res = maximize_term(ev.objective, config.optimizer)
            except TermUnfittableError:
                state.history.append(SelectionRecord(
                    phase, cand.spec, False, -np.inf, np.inf, None,
                    1e3 * (time.perf_counter() - started),
                ))
                continue
            cand_bic = bic(res.loglik, len(engine.blocks) + 1,
                           engine.n_obs, engine.n_fixed)
            state.history.append(SelectionRecord(
                phase, cand.spec, False, res.loglik, cand_bic, res.params,
                1e3 * (time.perf_counter() - started), res.n_evals,
            ))
            if cand_bic < best_bic_val:
                best_idx, best_bic_val = idx, cand_bic
                best_res, best_ev = res, ev
        if best_idx < 0 or best_bic_val >= state.best_bic - config.bic_tol:
            return
        cand = candidates.pop(best_idx)
        started = time.perf_counter()
        engine.commit(cand.block(), best_res.params, best_ev)
        state.selected.append((cand.spec, best_res.params))
        state.best_bic = best_bic_val
        state.bic_trajectory.append(best_bic_val)
        state.history.append(SelectionRecord(
            phase, cand.spec, True, best_res.loglik, best_bic_val,
            best_res.params, 1e3 * (time.perf_counter() - started),
        ))


def _fresh_state(engine) -> SelectionState:
    start_bic = bic(engine.loglik, len(engine.blocks),
                    engine.n_obs, engine.n_fixed)
    return SelectionState(
        engine=engine, selected=[], remaining=[], best_bic=start_bic,
        history=[], bic_trajectory=[start_bic],
    )


def fit_main_model(data: Dataset, bases: ExpandedBases,
                   config: FitConfig | None = None,
                   engine=None) -> SelectionState:
    """Forward-select spatial and temporal main-effect groups.

    Starts from the fixed-effects-only model as the floor and adds the
    best-BIC group per sweep until no group improves. The worst case
    accepts nothing and returns the plain least-squares state.
    """
    config = config or FitConfig()
    engine = engine if engine is not None else IncrementalModel(data.X, data.y)
    state = _fresh_state(engine)
    candidates = [
        _Candidate(blk.spec, lambda blk=blk: blk)
        for blk in build_main_blocks(data, bases)
    ]
    _forward_pass(engine, candidates, config, state, "main")
    return state


def reluctant_select(state: SelectionState, data: Dataset,
                     bases: ExpandedBases,
                     config: FitConfig | None = None) -> SelectionState:
    """Admit space-time interactions one reluctant sweep at a time.

    Every remaining (covariate, axis) pair is priced against the
    frozen model; the best is accepted only if it improves the BIC.
    Interaction blocks are built lazily on first evaluation since at
    application scale most are never needed before convergence.
    """
    config = config or FitConfig()
    pairs = [
        (p, m)
        for p, m in enumerate_interaction_candidates(data.n_covariates,
                                                     data.n_time_axes)
        if bases.spatial_rows is not None
        and bases.temporal_rows[m] is not None
    ]
    state.remaining = list(pairs)
    candidates = [
        _Candidate(
            TermSpec(p, INTERACTION_TERM, m),
            lambda p=p, m=m: build_interaction_block(data, bases, p, m),
        )
        for p, m in pairs
    ]
    _forward_pass(state.engine, candidates, config, state, "interaction")
    state.remaining = [(c.spec.covariate, c.spec.axis) for c in candidates]
    return state


@dataclass
class FittedTerm:
    """One selected term with its variance parameters and coefficients."""

    spec: TermSpec
    params: VarianceParams
    gamma: np.ndarray


@dataclass
class ModelFit:
    """Final fitted model: estimates, fit statistics, and the audit trail."""

    b_hat: np.ndarray
    terms: list[FittedTerm]
    sigma2_hat: float
    loglik: float
    bic: float
    n_obs: int
    n_fixed: int
    bic_trajectory: list[float]
    history: list[SelectionRecord]
    seconds: float
    meta: dict = field(default_factory=dict)

    @property
    def selected_specs(self) -> list[TermSpec]:
        return [t.spec for t in self.terms]


def _finalize(state: SelectionState, data: Dataset, bases: ExpandedBases,
              seconds: float) -> ModelFit:
    engine = state.engine
    b_hat, gammas, sigma2, loglik = engine.final_state()
    terms = [
        FittedTerm(block.spec, params, gamma)
        for (block, params), gamma in zip(engine.blocks, gammas)
    ]
    meta = {
        "n_spatial_components":
            0 if bases.spatial_rows is None else bases.spatial_rows.shape[1],
        "n_temporal_components": [
            0 if rows is None else rows.shape[1]
            for rows in bases.temporal_rows
        ],
    }
    return ModelFit(
        b_hat=b_hat, terms=terms, sigma2_hat=sigma2, loglik=loglik,
        bic=bic(loglik, len(terms), engine.n_obs, engine.n_fixed),
        n_obs=engine.n_obs, n_fixed=engine.n_fixed,
        bic_trajectory=list(state.bic_trajectory), history=state.history,
        seconds=seconds, meta=meta,
    )


def fit_model(data: Dataset, bases: ExpandedBases | None = None,
              config: FitConfig | None = None, engine=None) -> ModelFit:
    """Run the full procedure: main-effect selection, then interactions."""
    config = config or FitConfig()
    started = time.perf_counter()
    if bases is None:
        bases = build_bases(data)
    state = fit_main_model(data, bases, config, engine)
    if config.fit_interactions and data.n_time_axes > 0:
        state = reluctant_select(state, data, bases, config)
    return _finalize(state, data, bases, time.perf_counter() - started)


def fit_fixed_structure(data: Dataset, bases: ExpandedBases,
                        specs: list[TermSpec],
                        config: FitConfig | None = None,
                        engine=None) -> ModelFit:
    """Fit a prescribed term structure without any selection gate.

    Terms are committed in the given order, each with its variance
    parameters fitted against the terms committed before it. Terms
    whose basis is empty or whose optimization finds no finite
    likelihood are skipped and logged rather than failing the fit.
    """
    config = config or FitConfig()
    started = time.perf_counter()
    engine = engine if engine is not None else IncrementalModel(data.X, data.y)
    state = _fresh_state(engine)
    for spec in specs:
        block = block_for_spec(data, bases, spec)
        if block is None:
            continue
        t0 = time.perf_counter()
        ev = engine.evaluator(block)
        try:
            res = maximize_term(ev.objective, config.optimizer)
        except TermUnfittableError:
            state.history.append(SelectionRecord(
                "forced", spec, False, -np.inf, np.inf, None,
                1e3 * (time.perf_counter() - t0),
            ))
            continue
        engine.commit(block, res.params, ev)
        state.selected.append((spec, res.params))
        state.best_bic = bic(res.loglik, len(engine.blocks),
                             engine.n_obs, engine.n_fixed)
        state.bic_trajectory.append(state.best_bic)
        state.history.append(SelectionRecord(
            "forced", spec, True, res.loglik, state.best_bic, res.params,
            1e3 * (time.perf_counter() - t0), res.n_evals,
        ))
    return _finalize(state, data, bases, time.perf_counter() - started)


@dataclass
class CoefficientField:
    """Per-observation varying coefficients split into additive parts.

    ``parts`` maps (covariate, kind, axis) to one part's values at the
    observations; absent parts are identically zero and the total is
    always the exact sum of the mean and the stored parts.
    """

    names: list[str]
    n_obs: int
    mean: np.ndarray
    parts: dict[tuple[int, str, int | None], np.ndarray] = field(
        default_factory=dict
    )

    @property
    def n_covariates(self) -> int:
        return self.mean.size

    def part(self, covariate: int, kind: str,
             axis: int | None = None) -> np.ndarray:
        arr = self.parts.get((covariate, kind, axis))
        if arr is None:
            return np.zeros(self.n_obs)
        return arr

    def total(self, covariate: int) -> np.ndarray:
        out = np.full(self.n_obs, self.mean[covariate])
        for (p, _, _), arr in self.parts.items():
            if p == covariate:
                out = out + arr
        return out

    def totals(self) -> np.ndarray:
        return np.column_stack(
            [self.total(p) for p in range(self.n_covariates)]
        )


def field_from_rows(fit: ModelFit, names: list[str], srows: np.ndarray | None,
                    trows_list: list[np.ndarray | None],
                    n_obs: int) -> CoefficientField:
    """Evaluate the fitted coefficient processes at given basis rows.

    ``srows`` and ``trows_list`` hold the spatial and per-axis
    temporal eigenvector values at the evaluation points, shaped
    (n_obs, components). Spatial and temporal terms are plain basis
    expansions; an interaction term evaluates its spatial-major
    coefficient grid at each row pair.
    """
    field_ = CoefficientField(
        names=list(names), n_obs=n_obs,
        mean=np.asarray(fit.b_hat, dtype=float).copy(),
    )
    for term in fit.terms:
        spec = term.spec
        if spec.kind == SPATIAL_TERM:
            values = srows @ term.gamma
        elif spec.kind == INTERACTION_TERM:
            trows = trows_list[spec.axis]
            grid = term.gamma.reshape(srows.shape[1], trows.shape[1])
            values = ((srows @ grid) * trows).sum(axis=1)
        else:
            values = trows_list[spec.axis] @ term.gamma
        key = (spec.covariate, spec.kind, spec.axis)
        if key in field_.parts:
            field_.parts[key] = field_.parts[key] + values
        else:
            field_.parts[key] = values
    return field_


def reconstruct_coefficients(fit: ModelFit, data: Dataset,
                             bases: ExpandedBases) -> CoefficientField:
    """Evaluate every fitted coefficient process at the observations."""
    return field_from_rows(fit, data.names, bases.spatial_rows,
                           bases.temporal_rows, data.n_obs)


def variance_summaries(field: CoefficientField, data: Dataset):
    """Variance tables of the fitted coefficient processes.

    The first table gives the sample variance of each regression term
    x_p * beta_p over the observations. The second decomposes each
    coefficient's variance into shares from its spatial, temporal, and
    interaction parts; cross-covariances between parts land in a
    residual column so the shares plus residual sum to one whenever
    the coefficient varies at all.
    """
    table_a = []
    table_b = []
    for p in range(field.n_covariates):
        name = field.names[p]
        total = field.total(p)
        term_values = data.X[:, p] * total
        table_a.append({
            "covariate": name,
            "variance": float(np.var(term_values)),
        })
        var_total = float(np.var(total))
        row = {"covariate": name, "total_variance": var_total}
        share_sum = 0.0
        keys = [("spatial", (p, SPATIAL_TERM, None))]
        for m in range(data.n_time_axes):
            axis_name = data.times[m].name or f"t{m}"
            keys.append((f"time({axis_name})", (p, TEMPORAL_TERM, m)))
        for m in range(data.n_time_axes):
            axis_name = data.times[m].name or f"t{m}"
            keys.append((f"interact({axis_name})", (p, INTERACTION_TERM, m)))
        for label, key in keys:
            part = field.parts.get(key)
            if part is None or var_total <= 0.0:
                share = 0.0
            else:
                share = float(np.var(part)) / var_total
            row[label] = share
            share_sum += share
        row["residual"] = 1.0 - share_sum if var_total > 0.0 else 0.0
        table_b.append(row)
    return table_a, table_b
