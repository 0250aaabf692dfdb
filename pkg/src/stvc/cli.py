"""Command-line entry points: fit, simulate, and basis inspection.

Configuration lives in one INI-style file. The ``[data]`` section
names the input file and column roles, one ``[time.<name>]`` section
declares each time axis (linear by default, cyclic with a period when
flagged), and optional ``[basis]``, ``[optimizer]``, ``[fit]``, and
``[output]`` sections override engine defaults. All emitted numbers
carry 17 significant digits so they round-trip through text exactly.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import (
    DEFAULT_EIG_TOL,
    SPATIAL,
    TEMPORAL_CYCLIC,
    TEMPORAL_LINEAR,
    PointSet,
)
from .design import (
    INTERACTION_TERM,
    SPATIAL_TERM,
    TEMPORAL_TERM,
    Dataset,
    build_bases,
)
from .errors import ConfigError, ParseError, StvcError
from .optimize import DEFAULT_STARTS, OptConfig
from .select import (
    FitConfig,
    ModelFit,
    fit_fixed_structure,
    fit_model,
    reconstruct_coefficients,
    variance_summaries,
)
from .synth import (
    generate_dataset,
    holdout_split,
    predict_response,
    rmse,
    scenario_preset,
    subset_dataset,
    subset_field,
)


def fnum(x) -> str:
    """Format a number with 17 significant digits for exact round-trips."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TimeAxisConfig:
    name: str
    column: str
    cyclic: bool = False
    period: float | None = None


@dataclass
class RunConfig:
    """Everything one fit run needs, read from the INI file."""

    input: str = ""
    response: str = ""
    coord_x: str | None = None
    coord_y: str | None = None
    covariates: list[str] = field(default_factory=list)
    time_axes: list[TimeAxisConfig] = field(default_factory=list)
    spatial_components: int | None = None
    temporal_components: int | None = None
    eig_tol: float = DEFAULT_EIG_TOL
    optimizer: OptConfig = field(default_factory=OptConfig)
    bic_tol: float = 1e-6
    fit_interactions: bool = True
    output_dir: str = "stvc-output"


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(f"{what} must be two numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_starts(text: str) -> tuple[tuple[float, float], ...]:
    starts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            starts.append(_parse_pair(chunk, "start point"))
    if not starts:
        raise ConfigError("starts must list at least one point")
    return tuple(starts)


def _optimizer_from(cp: configparser.ConfigParser) -> OptConfig:
    if not cp.has_section("optimizer"):
        return OptConfig()
    sec = cp["optimizer"]
    try:
        return OptConfig(
            alpha_bounds=_parse_pair(sec.get("alpha_bounds", "-5, 5"),
                                     "alpha_bounds"),
            log_tau2_bounds=_parse_pair(sec.get("log_tau2_bounds", "-12, 12"),
                                        "log_tau2_bounds"),
            max_evals=sec.getint("max_evals", 200),
            rel_tol=sec.getfloat("rel_tol", 1e-5),
            starts=_parse_starts(sec.get("starts", "0 0; -4 2")),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [optimizer] section: {exc}") from exc


def parse_config(path: str) -> RunConfig:
    """Read and validate one INI run configuration."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    config = RunConfig()

    if cp.has_section("data"):
        sec = cp["data"]
        config.input = sec.get("input", "")
        config.response = sec.get("response", "")
        config.coord_x = sec.get("coord_x", None)
        config.coord_y = sec.get("coord_y", None)
        raw = sec.get("covariates", "")
        config.covariates = [
            c.strip() for c in raw.replace(",", " ").split() if c.strip()
        ]
    if (config.coord_x is None) != (config.coord_y is None):
        raise ConfigError("coord_x and coord_y must be set together")

    for section in cp.sections():
        if not section.startswith("time"):
            continue
        name = section.split(".", 1)[1] if "." in section else section
        sec = cp[section]
        cyclic = sec.getboolean("cyclic", False)
        period = sec.getfloat("period", None)
        if cyclic and (period is None or period <= 0):
            raise ConfigError(
                f"time axis {name!r} is cyclic and needs a positive period"
            )
        config.time_axes.append(TimeAxisConfig(
            name=name, column=sec.get("column", name),
            cyclic=cyclic, period=period if cyclic else None,
        ))

    if cp.has_section("basis"):
        sec = cp["basis"]
        config.spatial_components = sec.getint("spatial_components", None)
        config.temporal_components = sec.getint("temporal_components", None)
        config.eig_tol = sec.getfloat("eig_tol", DEFAULT_EIG_TOL)
    config.optimizer = _optimizer_from(cp)
    if cp.has_section("fit"):
        sec = cp["fit"]
        config.fit_interactions = sec.getboolean("interactions", True)
        config.bic_tol = sec.getfloat("bic_tol", 1e-6)
    if cp.has_section("output"):
        config.output_dir = cp["output"].get("directory", config.output_dir)

    if not config.input:
        raise ConfigError("[data] input is required")
    if not config.response:
        raise ConfigError("[data] response is required")
    return config


def load_dataset(path: str, config: RunConfig) -> Dataset:
    """Parse a delimited text file into a Dataset.

    Requires a header naming every configured column; any missing
    column, nonnumeric cell, or nonfinite value is reported with its
    line and column.
    """
    coord_cols = []
    if config.coord_x is not None:
        coord_cols = [config.coord_x, config.coord_y]
    needed = ([config.response] + config.covariates + coord_cols
              + [ax.column for ax in config.time_axes])
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path!r}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path!r} is empty")
        index = {name.strip(): i for i, name in enumerate(header)}
        for col in needed:
            if col not in index:
                raise ParseError(f"column {col!r} not found in {path!r}")
        cols = [index[c] for c in needed]
        values: list[list[float]] = [[] for _ in needed]
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ParseError(
                    f"line {lineno}: expected {len(header)} fields, "
                    f"found {len(row)}"
                )
            for slot, col in enumerate(cols):
                cell = row[col]
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"line {lineno}, column {needed[slot]!r}: "
                        f"cannot parse {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise ParseError(
                        f"line {lineno}, column {needed[slot]!r}: "
                        "nonfinite value"
                    )
                values[slot].append(v)
    if not values[0]:
        raise ParseError(f"{path!r} contains no data rows")

    arrays = [np.asarray(v) for v in values]
    n = arrays[0].size
    y = arrays[0]
    n_cov = len(config.covariates)
    x = np.column_stack([np.ones(n)] + arrays[1:1 + n_cov])
    pos = 1 + n_cov
    coords = None
    if coord_cols:
        coords = PointSet.from_coords(
            np.column_stack(arrays[pos:pos + 2]), SPATIAL, name="site",
        )
        pos += 2
    times = []
    for ax in config.time_axes:
        kind = TEMPORAL_CYCLIC if ax.cyclic else TEMPORAL_LINEAR
        times.append(PointSet.from_coords(
            arrays[pos], kind, period=ax.period, name=ax.name,
        ))
        pos += 1
    return Dataset(y=y, X=x, coords=coords, times=times,
                   names=["intercept"] + list(config.covariates))


def _axis_names(data: Dataset) -> list[str]:
    return [ts.name or f"t{m}" for m, ts in enumerate(data.times)]


def _part_columns(data: Dataset) -> list[tuple[str, str, int | None]]:
    axes = _axis_names(data)
    cols: list[tuple[str, str, int | None]] = [("spatial", SPATIAL_TERM, None)]
    for m, ax in enumerate(axes):
        cols.append((f"time({ax})", TEMPORAL_TERM, m))
    for m, ax in enumerate(axes):
        cols.append((f"interact({ax})", INTERACTION_TERM, m))
    return cols


def write_coefficients(path: Path, field_, data: Dataset):
    """One row per observation: axis positions, then each coefficient's
    total and additive parts."""
    parts = _part_columns(data)
    header = []
    coord_values = []
    if data.coords is not None:
        header += ["site_x", "site_y"]
        pts = data.coords.points[data.coords.obs_index]
        coord_values += [pts[:, 0], pts[:, 1]]
    for m, ts in enumerate(data.times):
        header.append(_axis_names(data)[m])
        coord_values.append(ts.points[ts.obs_index, 0])
    for p, name in enumerate(field_.names):
        header.append(f"{name}:total")
        header.append(f"{name}:mean")
        header += [f"{name}:{label}" for label, _, _ in parts]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        columns = list(coord_values)
        for p in range(len(field_.names)):
            columns.append(field_.total(p))
            columns.append(np.full(field_.n_obs, field_.mean[p]))
            for _, kind, axis in parts:
                columns.append(field_.part(p, kind, axis))
        for i in range(field_.n_obs):
            writer.writerow([fnum(col[i]) for col in columns])


def fit_statistics(fit: ModelFit, field_, data: Dataset) -> dict:
    """Goodness-of-fit numbers for the summary table."""
    yhat = (data.X * field_.totals()).sum(axis=1)
    resid = data.y - yhat
    rss = float(resid @ resid)
    tss = float(np.sum((data.y - data.y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    k = fit.n_fixed + 2 * len(fit.terms)
    denom = fit.n_obs - k - 1
    r2_adj = 1.0 - (1.0 - r2) * (fit.n_obs - 1) / denom if denom > 0 else r2
    return {
        "n_obs": fit.n_obs,
        "n_fixed": fit.n_fixed,
        "n_terms": len(fit.terms),
        "r2": r2,
        "r2_adj": r2_adj,
        "sigma2_hat": fit.sigma2_hat,
        "loglik": fit.loglik,
        "bic": fit.bic,
        "seconds": fit.seconds,
    }


def write_summary(path: Path, stats: dict, fit: ModelFit, data: Dataset):
    axes = _axis_names(data)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["key", "value"])
        for key, value in stats.items():
            writer.writerow([key, fnum(value)])
        for term in fit.terms:
            label = term.spec.label(data.names, axes)
            writer.writerow([f"tau2[{label}]", fnum(term.params.tau2)])
            writer.writerow([f"alpha[{label}]", fnum(term.params.alpha)])
        for p, name in enumerate(data.names):
            writer.writerow([f"mean[{name}]", fnum(fit.b_hat[p])])


def write_variance_decomposition(path: Path, table_a, table_b):
    keys = [k for k in table_b[0] if k != "covariate"] if table_b else []
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["covariate", "term_variance"] + keys)
        for row_a, row_b in zip(table_a, table_b):
            writer.writerow(
                [row_a["covariate"], fnum(row_a["variance"])]
                + [fnum(row_b[k]) for k in keys]
            )


def write_history(path: Path, fit: ModelFit, data: Dataset):
    axes = _axis_names(data)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["phase", "term", "accepted", "loglik", "bic",
                         "tau2", "alpha", "wall_ms", "n_evals"])
        for rec in fit.history:
            writer.writerow([
                rec.phase,
                rec.spec.label(data.names, axes),
                int(rec.accepted),
                fnum(rec.loglik) if np.isfinite(rec.loglik) else "-inf",
                fnum(rec.bic) if np.isfinite(rec.bic) else "inf",
                fnum(rec.params.tau2) if rec.params else "",
                fnum(rec.params.alpha) if rec.params else "",
                fnum(rec.wall_ms),
                rec.n_evals,
            ])


def run_fit(config: RunConfig) -> int:
    data = load_dataset(config.input, config)
    bases = build_bases(data, config.spatial_components,
                        config.temporal_components, config.eig_tol)
    fit_config = FitConfig(optimizer=config.optimizer,
                           bic_tol=config.bic_tol,
                           fit_interactions=config.fit_interactions)
    fit = fit_model(data, bases, fit_config)
    field_ = reconstruct_coefficients(fit, data, bases)
    table_a, table_b = variance_summaries(field_, data)
    stats = fit_statistics(fit, field_, data)

    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_coefficients(outdir / "coefficients.csv", field_, data)
    write_summary(outdir / "summary.csv", stats, fit, data)
    write_variance_decomposition(outdir / "variance_decomposition.csv",
                                 table_a, table_b)
    write_history(outdir / "selection_history.csv", fit, data)

    axes = _axis_names(data)
    print(f"fit: N={fit.n_obs} P={fit.n_fixed} terms={len(fit.terms)}")
    print(
        f"r2_adj={stats['r2_adj']:.4f} loglik={fit.loglik:.4f} "
        f"bic={fit.bic:.4f} seconds={fit.seconds:.2f}"
    )
    for term in fit.terms:
        print(
            f"  {term.spec.label(data.names, axes)}: "
            f"tau2={term.params.tau2:.6g} alpha={term.params.alpha:.6g}"
        )
    print(f"outputs written to {outdir}")
    return 0


def _engine_config(path: str | None):
    """Basis caps and fit settings from an optional INI file."""
    if path is None:
        return None, None, DEFAULT_EIG_TOL, FitConfig()
    config = RunConfig()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    spatial = temporal = None
    eig_tol = DEFAULT_EIG_TOL
    if cp.has_section("basis"):
        sec = cp["basis"]
        spatial = sec.getint("spatial_components", None)
        temporal = sec.getint("temporal_components", None)
        eig_tol = sec.getfloat("eig_tol", DEFAULT_EIG_TOL)
    fit_interactions = True
    bic_tol = 1e-6
    if cp.has_section("fit"):
        fit_interactions = cp["fit"].getboolean("interactions", True)
        bic_tol = cp["fit"].getfloat("bic_tol", 1e-6)
    fit_config = FitConfig(optimizer=_optimizer_from(cp), bic_tol=bic_tol,
                           fit_interactions=fit_interactions)
    return spatial, temporal, eig_tol, fit_config


def run_simulate(scenario: str, replicates: int, seed: int,
                 output_dir: str, observed: int | None = None,
                 config_path: str | None = None) -> int:
    """Replicated generate-fit-score runs for one named scenario.

    Each replicate fits three models on the same data: ``selected``
    runs the full forward procedure over every candidate term,
    ``true`` fits the generating structure directly, and ``ols`` keeps
    every coefficient constant as a baseline. Scores are appended to
    results.csv; when ``observed`` is set, the remaining rows score
    predictive accuracy.
    """
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    preset = scenario_preset(scenario, seed=seed)
    spatial, temporal, eig_tol, fit_config = _engine_config(config_path)
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    results_path = outdir / "results.csv"
    new_file = not results_path.exists() or results_path.stat().st_size == 0

    rows = []
    for r in range(replicates):
        spec = preset.reseeded(seed + r)
        data_full, truth_full = generate_dataset(spec)
        held = None
        if observed is not None:
            obs_rows, held_rows = holdout_split(spec.n_obs, observed,
                                                spec.seed)
            data = subset_dataset(data_full, obs_rows)
            truth = subset_field(truth_full, obs_rows)
            held = subset_dataset(data_full, held_rows)
        else:
            data, truth = data_full, truth_full
        bases = build_bases(data, spatial, temporal, eig_tol)

        for model_name, fitter in (
            ("selected", lambda: fit_model(data, bases, fit_config)),
            ("true", lambda: fit_fixed_structure(
                data, bases, spec.all_true_specs(), fit_config)),
            ("ols", lambda: fit_fixed_structure(data, bases, [],
                                                fit_config)),
        ):
            started = time.perf_counter()
            fit = fitter()
            seconds = time.perf_counter() - started
            field_ = reconstruct_coefficients(fit, data, bases)
            predictive = ""
            if held is not None:
                yhat = predict_response(fit, bases, held)
                predictive = fnum(float(np.sqrt(np.mean(
                    (yhat - held.y) ** 2
                ))))
            for p, name in enumerate(data.names):
                rows.append([
                    spec.name or scenario, r, model_name, name,
                    fnum(rmse(field_, truth, p)), predictive, fnum(seconds),
                ])

    with open(results_path, "a", newline="") as handle:
        writer = csv.writer(handle)
        if new_file:
            writer.writerow(["scenario", "replicate", "model", "coefficient",
                            "rmse", "predictive_rmse", "seconds"])
        writer.writerows(rows)

    print(f"{scenario}: {replicates} replicates -> {results_path}")
    by_key: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        by_key.setdefault((row[2], row[3]), []).append(float(row[4]))
    for (model, coef), values in sorted(by_key.items()):
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        print(
            f"  {model:<8} {coef:<12} median={med:.4f} "
            f"q1={q1:.4f} q3={q3:.4f}"
        )
    return 0


def run_basis(config: RunConfig, inspect: bool) -> int:
    """Report each axis' basis; with --inspect, dump the eigenvectors."""
    data = load_dataset(config.input, config)
    bases = build_bases(data, config.spatial_components,
                        config.temporal_components, config.eig_tol)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    all_bases = []
    if bases.spatial is not None:
        all_bases.append(bases.spatial)
    all_bases.extend(tb for tb in bases.temporals if tb is not None)
    for b in all_bases:
        name = b.name or b.axis_kind
        print(
            f"{name}: kind={b.axis_kind} points={b.points.shape[0]} "
            f"components={b.n_components} kernel_range={b.kernel_range:.6g}"
        )
        if b.is_empty:
            continue
        print("  eigenvalues: "
              + " ".join(format(v, ".6g") for v in b.eigvals))
        if inspect:
            path = outdir / f"basis_{name}.csv"
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle)
                coord_names = [f"c{i}" for i in range(b.points.shape[1])]
                writer.writerow(coord_names + [
                    f"e{l}" for l in range(1, b.n_components + 1)
                ])
                writer.writerow(
                    [""] * len(coord_names)
                    + [fnum(v) for v in b.eigvals]
                )
                for i in range(b.points.shape[0]):
                    writer.writerow(
                        [fnum(v) for v in b.points[i]]
                        + [fnum(v) for v in b.eigvecs[i]]
                    )
            print(f"  written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stvc",
        description="Spatio-temporally varying coefficient regression",
    )
    sub = parser.add_subparsers(dest="command")

    p_fit = sub.add_parser("fit", help="fit a model to a data file")
    p_fit.add_argument("--config", required=True, help="INI run configuration")
    p_fit.add_argument("--output-dir", help="override the output directory")

    p_sim = sub.add_parser("simulate", help="run scenario replicates")
    p_sim.add_argument("--scenario", required=True, help="preset name")
    p_sim.add_argument("--replicates", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--observed", type=int, default=None,
                       help="observe this many rows; score the rest")
    p_sim.add_argument("--output-dir", default="stvc-output")
    p_sim.add_argument("--config", default=None,
                       help="optional INI with [basis]/[optimizer]/[fit]")

    p_basis = sub.add_parser("basis", help="report basis diagnostics")
    p_basis.add_argument("--config", required=True)
    p_basis.add_argument("--inspect", action="store_true",
                         help="write eigenvector tables")
    p_basis.add_argument("--output-dir", help="override the output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        if args.command == "fit":
            config = parse_config(args.config)
            if args.output_dir:
                config.output_dir = args.output_dir
            return run_fit(config)
        if args.command == "simulate":
            return run_simulate(args.scenario, args.replicates, args.seed,
                                args.output_dir, args.observed, args.config)
        config = parse_config(args.config)
        if args.output_dir:
            config.output_dir = args.output_dir
        return run_basis(config, args.inspect)
    except StvcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
