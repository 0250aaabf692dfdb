"""Spatio-temporally varying coefficient regression.

Linear regression whose coefficients drift over space, over one or
more time axes (linear or cyclic), and over their interactions. Each
varying coefficient is a low-rank Gaussian process expanded in Moran
eigenvector bases; the model is estimated as a linear mixed model with
a profiled restricted likelihood, and terms are selected forward with
BIC, interactions reluctantly last, using Schur-complement updates so
candidate evaluation never refactors the full system.
"""

from .basis import (
    MoranBasis,
    PointSet,
    build_basis,
    expand_to_observations,
    extend_to_points,
)
from .design import (
    Dataset,
    ExpandedBases,
    TermBlock,
    TermSpec,
    build_bases,
    build_interaction_block,
    build_main_blocks,
    count_columns,
)
from .errors import (
    ConfigError,
    DegenerateAxisError,
    NumericalFailureError,
    ParameterError,
    ParseError,
    SingularDesignError,
    StvcError,
    TermUnfittableError,
)
from .likelihood import (
    LikelihoodState,
    ModelTerms,
    VarianceParams,
    bic,
    profile_loglik,
)
from .optimize import OptConfig, OptResult, maximize_term
from .select import (
    CandidateEvaluator,
    CoefficientField,
    FitConfig,
    FittedTerm,
    IncrementalModel,
    ModelFit,
    NaiveModel,
    SelectionRecord,
    SelectionState,
    fit_fixed_structure,
    fit_main_model,
    fit_model,
    reconstruct_coefficients,
    reluctant_select,
    variance_summaries,
)
from .synth import (
    ScenarioSpec,
    generate_dataset,
    rmse,
    scenario_preset,
)

__version__ = "0.1.0"

__all__ = [
    "MoranBasis", "PointSet", "build_basis", "expand_to_observations",
    "extend_to_points", "Dataset", "ExpandedBases", "TermBlock", "TermSpec",
    "build_bases", "build_interaction_block", "build_main_blocks",
    "count_columns", "StvcError", "ConfigError", "DegenerateAxisError",
    "NumericalFailureError", "ParameterError", "ParseError",
    "SingularDesignError", "TermUnfittableError", "LikelihoodState",
    "ModelTerms", "VarianceParams", "bic", "profile_loglik", "OptConfig",
    "OptResult", "maximize_term", "CandidateEvaluator", "CoefficientField",
    "FitConfig", "FittedTerm", "IncrementalModel", "ModelFit", "NaiveModel",
    "SelectionRecord", "SelectionState", "fit_fixed_structure",
    "fit_main_model", "fit_model", "reconstruct_coefficients",
    "reluctant_select", "variance_summaries", "ScenarioSpec",
    "generate_dataset", "rmse", "scenario_preset",
]
