"""Per-term variance parameter search.

Each term contributes two free parameters, the log variance ratio and
the smoothness exponent. The profiled likelihood over those two is
cheap to evaluate but has no analytic gradient and can degenerate at
the edges of the feasible box, so the search is bounded Nelder-Mead
from a fixed set of starts. Everything is deterministic: the simplex
path depends only on the starts and the objective values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalFailureError, TermUnfittableError
from .likelihood import VarianceParams

DEFAULT_STARTS = ((0.0, 0.0), (-4.0, 2.0))

# Failed evaluations get a huge finite penalty instead of inf so the
# simplex arithmetic inside the minimizer stays warning-free.
_FAILURE_PENALTY = 1e300


@dataclass(frozen=True)
class OptConfig:
    """Bounds, budget, and starts for the two-parameter search.

    ``max_evals`` caps objective calls per start. ``rel_tol`` is the
    simplex shrinkage tolerance on the objective value.
    """

    alpha_bounds: tuple[float, float] = (-5.0, 5.0)
    log_tau2_bounds: tuple[float, float] = (-12.0, 12.0)
    max_evals: int = 200
    rel_tol: float = 1e-5
    starts: tuple[tuple[float, float], ...] = DEFAULT_STARTS

    def __post_init__(self):
        if self.max_evals < 10:
            raise ValueError("max_evals must be at least 10")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if not self.starts:
            raise ValueError("need at least one start point")


@dataclass
class OptResult:
    """Best evaluated point of one term's likelihood maximization."""

    params: VarianceParams
    loglik: float
    n_evals: int = 0
    start_index: int = 0


class _Tracker:
    """Remembers the best point actually evaluated, not the final simplex.

    Ties keep the earlier point, so among equal objective values the
    first one evaluated wins.
    """

    def __init__(self):
        self.best_x = None
        self.best_f = np.inf
        self.n_evals = 0

    def update(self, x, f):
        self.n_evals += 1
        if f < self.best_f:
            self.best_f = f
            self.best_x = np.array(x, dtype=float)


def maximize_term(objective, config: OptConfig | None = None) -> OptResult:
    """Maximize a log-likelihood over (log tau2, alpha) within bounds.

    ``objective(log_tau2, alpha)`` returns a log-likelihood and may
    raise :class:`NumericalFailureError` where the fit degenerates;
    such points count as -inf. Starts are tried in order and a later
    start must be strictly better to displace an earlier one. If no
    start yields a finite value anywhere, the term cannot be fit and
    :class:`TermUnfittableError` is raised.
    """
    config = config or OptConfig()
    bounds = [config.log_tau2_bounds, config.alpha_bounds]
    options = {
        "maxfev": config.max_evals,
        "fatol": config.rel_tol,
        "xatol": 1e-3,
    }

    best: OptResult | None = None
    total_evals = 0
    for start_index, x0 in enumerate(config.starts):
        tracker = _Tracker()

        def neg_loglik(x):
            try:
                value = objective(float(x[0]), float(x[1]))
            except NumericalFailureError:
                value = -np.inf
            f = -value if np.isfinite(value) else _FAILURE_PENALTY
            tracker.update(x, f)
            return f

        minimize(neg_loglik, x0=np.asarray(x0, dtype=float),
                 method="Nelder-Mead", bounds=bounds, options=options)
        total_evals += tracker.n_evals
        if tracker.best_x is None or tracker.best_f >= _FAILURE_PENALTY:
            continue
        if best is None or -tracker.best_f > best.loglik:
            log_tau2, alpha = tracker.best_x
            best = OptResult(
                params=VarianceParams(float(np.exp(log_tau2)), float(alpha)),
                loglik=float(-tracker.best_f),
                start_index=start_index,
            )
    if best is None:
        raise TermUnfittableError(
            "no variance parameter start produced a finite likelihood"
        )
    best.n_evals = total_evals
    return best
