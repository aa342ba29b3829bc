"""Command-line interface.

Subcommands cover the full workflow: `simulate` writes a synthetic
panel with its truth, `estimate` fits the mean and covariance of a
panel, `evaluate` scores an estimate against a truth, `benchmark`
runs the simulation study, `portfolio` builds minimum-variance
weights from a covariance file, and `backtest` rolls the whole
pipeline over a historical panel.

Every value-producing command writes delimited text files plus a
manifest.json recording the resolved configuration, the package
version, and a sha256 digest of each input file, so a run can be
reproduced from its output directory alone.  Options may also be
supplied as `key = value` lines in a file passed with --config;
explicit command-line flags win over the file.

Exit codes: 0 success, 2 unreadable or malformed input, 3 input whose
missingness is not monotone, 4 estimation or solver failure, 5 bad
usage (unknown flags, bad option values).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, plots
from .evaluate import (
    BenchmarkConfig,
    NonPdCovariance,
    TruthSpec,
    complete_estimator,
    ell,
    kl_mvn,
    mvn_entropy,
    observed_estimator,
    run_benchmark,
    zero_structure,
)
from .monomle import (
    DegenerateColumn,
    MonomvnConfig,
    MvnEstimate,
    attach_factors,
    estimate,
    extract_asset_block,
    extract_factor_block,
)
from .panel import (
    NonMonotonePattern,
    PanelError,
    read_labeled_matrix,
    read_labeled_vector,
    read_panel,
    validate_and_order,
    write_labeled_matrix,
    write_labeled_vector,
    write_panel,
)
from .portfolio import (
    BacktestConfig,
    ConvergenceError,
    backtest,
    kkt_residuals,
    min_variance,
)
from .regress import ALL_METHODS, CvSpec, RankDeficient, Selection
from .simulate import SimSpec, generate_trial

__all__ = ["main"]


class UsageError(Exception):
    """Bad flags or option values; maps to exit code 5."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is taken by parse failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(5, f"{self.prog}: error: {message}\n")


def _comma_strings(text: str) -> tuple[str, ...]:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return items


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    x = float(value)
    if np.isnan(x):
        return "NA"
    return "%.17g" % x


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    inputs: list, outputs: list[str]) -> None:
    config = {
        key: _jsonable(value)
        for key, value in sorted(vars(args).items())
        if key not in ("func", "config") and not key.startswith("_")
    }
    manifest = {
        "command": command,
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": sorted(outputs),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    if args.out is None:
        raise UsageError("an output directory is required (--out DIR)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cv_from_args(args) -> CvSpec:
    try:
        return CvSpec(scheme=args.cv, folds=args.folds, seed=args.cv_seed,
                      rule=args.rule)
    except ValueError as exc:
        raise UsageError(str(exc))


def _add_cv_flags(sub) -> None:
    sub.add_argument("--cv", default="tenfold", choices=["tenfold", "loo"],
                     help="cross-validation scheme (default tenfold)")
    sub.add_argument("--folds", type=int, default=10,
                     help="fold count for tenfold CV (default 10)")
    sub.add_argument("--cv-seed", type=int, default=0,
                     help="seed for the fold permutation (default 0)")
    sub.add_argument("--rule", default=None,
                     choices=["minimum-score", "one-standard-error"],
                     help="hyperparameter pick rule (default per method)")


def _read_input_panel(path, reverse_rows: bool):
    grid, labels = read_panel(path)
    if reverse_rows:
        grid = grid[::-1]
    return validate_and_order(grid, labels)


def _print_table(header: list[str], rows: list[list[str]]) -> None:
    widths = [len(h) for h in header]
    for row in rows:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    line = "  ".join(h.ljust(widths[j]) for j, h in enumerate(header))
    print(line)
    print("  ".join("-" * w for w in widths))
    for row in rows:
        print("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)))


# ---------------------------------------------------------------- simulate

def _cmd_simulate(args) -> None:
    try:
        spec = SimSpec(
            m=args.m, n=args.n, distribution=args.distribution, nu=args.nu,
            seed=args.seed, wishart_df=args.wishart_df,
            wishart_scale=args.wishart_scale, exp_rate=args.exp_rate,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    trial = generate_trial(spec)
    out = _out_dir(args)
    labels = trial.panel.column_labels
    write_panel(out / "panel.csv", trial.panel)
    complete_panel, _ = validate_and_order(trial.complete, labels)
    write_panel(out / "complete.csv", complete_panel)
    write_labeled_vector(out / "truth_mean.csv", trial.mean, labels, name="mean")
    write_labeled_matrix(out / "truth_cov.csv", trial.covariance, labels)
    outputs = ["panel.csv", "complete.csv", "truth_mean.csv", "truth_cov.csv"]
    _write_manifest(out, "simulate", args, [], outputs)
    nu_text = f", nu={trial.nu:.4g}" if trial.nu is not None else ""
    print(f"wrote {out}/panel.csv: {spec.m} columns, {spec.n} rows, "
          f"{args.distribution}{nu_text}; lengths "
          f"{trial.lengths.min()}..{trial.lengths.max()}")


# ---------------------------------------------------------------- estimate

def _selection_fields(selection: Selection | None):
    if selection is None:
        return "", "", "", ""
    return (selection.kind, selection.value,
            "" if selection.cv_score is None else selection.cv_score,
            selection.rule or "")


def _cmd_estimate(args) -> None:
    cv = _cv_from_args(args)
    try:
        # probe with one factor column when --factors is given; the real
        # count replaces it after the factor panel is read
        config = MonomvnConfig(method=args.method, parsimony_p=args.parsimony_p,
                               cv=cv,
                               factor_count=1 if args.factors is not None else 0,
                               mle_denominator=args.mle_denominator)
    except ValueError as exc:
        raise UsageError(str(exc))

    grid, labels = read_panel(args.input)
    if args.reverse_rows:
        grid = grid[::-1]
    inputs = [args.input]
    n_factors = 0
    if args.factors is not None:
        fgrid, flabels = read_panel(args.factors)
        inputs.append(args.factors)
        if args.reverse_rows:
            fgrid = fgrid[::-1]
        asset_panel, _ = validate_and_order(grid, labels)
        factor_panel, _ = validate_and_order(fgrid, flabels)
        big_grid, big_labels, n_factors = attach_factors(asset_panel,
                                                         factor_panel)
        panel, order = validate_and_order(big_grid, big_labels)
        config = MonomvnConfig(method=args.method, parsimony_p=args.parsimony_p,
                               cv=cv, factor_count=n_factors,
                               mle_denominator=args.mle_denominator)
    else:
        panel, order = validate_and_order(grid, labels)

    est = estimate(panel, order, config)
    report = extract_asset_block(est, n_factors) if n_factors else est

    out = _out_dir(args)
    write_labeled_vector(out / "mean.csv", report.mean, report.labels,
                         name="mean")
    write_labeled_matrix(out / "covariance.csv", report.covariance,
                         report.labels)
    log_rows = []
    for rec in est.method_log:
        kind, value, score, rule = _selection_fields(rec.selection)
        log_rows.append([rec.position, rec.column + 1, rec.label, rec.n_obs,
                         rec.design_cols, rec.method, kind, value, score, rule])
    _write_rows(out / "method_log.csv",
                ["position", "column", "label", "n_obs", "design_cols",
                 "method", "selection", "value", "cv_score", "rule"],
                log_rows)
    outputs = ["mean.csv", "covariance.csv", "method_log.csv"]
    if n_factors:
        write_labeled_matrix(out / "factor_covariance.csv",
                             extract_factor_block(est, n_factors),
                             est.labels[:n_factors])
        outputs.append("factor_covariance.csv")
    _write_manifest(out, "estimate", args, inputs, outputs)

    used = {}
    for rec in est.method_log:
        used[rec.method] = used.get(rec.method, 0) + 1
    used_text = ", ".join(f"{k}:{v}" for k, v in sorted(used.items()))
    print(f"estimated {report.mean.size} columns "
          f"(positive definite: {est.positive_definite}); methods {used_text}")


# ---------------------------------------------------------------- evaluate

def _resolve(primary, directory, default_name, what) -> Path:
    if primary is not None:
        return Path(primary)
    if directory is not None:
        return Path(directory) / default_name
    raise UsageError(f"give {what} directly or via its directory option")


def _cmd_evaluate(args) -> None:
    mean_path = _resolve(args.mean, args.estimate, "mean.csv", "--mean")
    cov_path = _resolve(args.covariance, args.estimate, "covariance.csv",
                        "--covariance")
    tmean_path = _resolve(args.truth_mean, args.truth, "truth_mean.csv",
                          "--truth-mean")
    tcov_path = _resolve(args.truth_cov, args.truth, "truth_cov.csv",
                         "--truth-cov")
    mean, labels = read_labeled_vector(mean_path)
    cov, cov_labels = read_labeled_matrix(cov_path)
    truth_mean, tlabels = read_labeled_vector(tmean_path)
    truth_cov, tcov_labels = read_labeled_matrix(tcov_path)
    if labels != cov_labels or tlabels != tcov_labels:
        raise UsageError("mean and covariance label sets differ")
    if labels != tlabels:
        raise UsageError("estimate and truth label sets differ")

    truth = TruthSpec(mean=truth_mean, covariance=truth_cov,
                      distribution=args.distribution, nu=args.nu,
                      mc_draws=args.mc_draws, seed=args.score_seed)
    if args.distribution == "mvt" and args.nu is None:
        raise UsageError("--nu is required for a Student-t truth")

    try:
        score = ell(mean, cov, truth)
        pd_flag = True
    except NonPdCovariance:
        score = None
        pd_flag = False
    kl = np.nan
    if pd_flag and args.distribution == "mvn":
        kl = kl_mvn(truth_mean, truth_cov, mean, cov)
    entropy = mvn_entropy(truth_cov)

    ell_txt = _fmt(score.value) if score else "-inf"
    se_txt = _fmt(score.se) if score else ""
    print(f"ell {ell_txt}" + (f" (se {se_txt})" if score and score.se else ""))
    print(f"kl {_fmt(kl)}")
    print(f"truth entropy {_fmt(entropy)}")
    print(f"estimate positive definite: {pd_flag}")

    rows = [["ell", ell_txt], ["ell_se", se_txt if score else ""],
            ["kl", _fmt(kl)], ["truth_entropy", _fmt(entropy)],
            ["positive_definite", _fmt(pd_flag)]]
    zs = None
    if args.zero_structure and pd_flag:
        zs = zero_structure(cov)
        rows += [
            ["covariance_zeros", _fmt(zs.covariance_zeros)],
            ["covariance_zero_fraction", _fmt(zs.covariance_zero_fraction)],
            ["precision_zeros", _fmt(zs.precision_zeros)],
            ["precision_zero_fraction", _fmt(zs.precision_zero_fraction)],
        ]
        print(f"covariance zeros {zs.covariance_zeros}/{zs.n_offdiag_pairs} "
              f"({100 * zs.covariance_zero_fraction:.1f}%)")

    if args.out is not None:
        out = _out_dir(args)
        _write_rows(out / "scores.csv", ["metric", "value"], rows)
        outputs = ["scores.csv"]
        if zs is not None:
            _write_rows(out / "zeros_by_column.csv", ["label", "zeros"],
                        [[lab, z] for lab, z in zip(labels, zs.zeros_by_column)])
            outputs.append("zeros_by_column.csv")
        _write_manifest(out, "evaluate", args,
                        [mean_path, cov_path, tmean_path, tcov_path], outputs)


# ---------------------------------------------------------------- benchmark

def _cmd_benchmark(args) -> None:
    cv = _cv_from_args(args)
    try:
        config = BenchmarkConfig(
            m=args.m, n=args.n, trials=args.trials,
            methods=args.methods, parsimony=args.parsimony,
            include_complete=not args.no_complete,
            include_observed=not args.no_observed,
            distribution=args.distribution, nu=args.nu,
            mc_draws=args.mc_draws, seed=args.seed, cv=cv,
            mle_denominator=args.mle_denominator,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    result = run_benchmark(config)

    out = _out_dir(args)
    _write_rows(out / "scores.csv",
                ["trial", "estimator", "ell", "ell_se", "kl", "rank",
                 "positive_definite"],
                [[r["trial"], r["estimator"], r["ell"], r["ell_se"], r["kl"],
                  r["rank"], r["positive_definite"]] for r in result.rows()])
    medians = result.median_ranks
    summary_rows = []
    for j, name in enumerate(result.estimators):
        finite = np.isfinite(result.ell[:, j])
        summary_rows.append([
            name, medians[j], result.ranks[:, j].mean(),
            result.ell[finite, j].mean() if finite.any() else np.nan,
            int((~result.pd_flags[:, j]).sum()),
        ])
    _write_rows(out / "summary.csv",
                ["estimator", "median_rank", "mean_rank", "mean_ell",
                 "non_pd_trials"], summary_rows)
    outputs = ["scores.csv", "summary.csv"]
    if not args.no_figures:
        plots.save_rank_boxplot(result.ranks, result.estimators,
                                out / "rank_boxplot.png",
                                title=f"m={config.m}, n={config.n}, "
                                      f"{config.trials} trials")
        finite_ell = np.where(np.isfinite(result.ell), result.ell, np.nan)
        plots.save_metric_boxplot(finite_ell, result.estimators,
                                  out / "ell_boxplot.png",
                                  ylabel="expected log likelihood")
        outputs += ["rank_boxplot.png", "ell_boxplot.png"]
    _write_manifest(out, "benchmark", args, [], outputs)

    table = [[row[0], f"{row[1]:.2f}", f"{row[2]:.2f}",
              "" if np.isnan(row[3]) else f"{row[3]:.4f}", str(row[4])]
             for row in summary_rows]
    _print_table(["estimator", "median_rank", "mean_rank", "mean_ell",
                  "non_pd"], table)


# ---------------------------------------------------------------- portfolio

def _cmd_portfolio(args) -> None:
    cov, labels = read_labeled_matrix(args.input)
    result = min_variance(cov, no_short=not args.allow_short)
    res = kkt_residuals(cov, result.weights)
    print(f"objective {_fmt(result.objective)}; "
          f"{result.active_count} active positions; "
          f"worst KKT residual {max(res.values()):.3e}")
    for label, w in zip(labels, result.weights):
        if w > 0 or not args.active_only:
            print(f"  {label}  {w:.6f}")
    if args.out is not None:
        out = _out_dir(args)
        write_labeled_vector(out / "weights.csv", result.weights, labels,
                             name="weight")
        _write_manifest(out, "portfolio", args, [args.input], ["weights.csv"])


# ---------------------------------------------------------------- backtest

def _read_series(path, flip: bool, what: str) -> np.ndarray:
    grid, _ = read_panel(path)
    if grid.shape[1] != 1:
        raise UsageError(f"{what} file must have exactly one column")
    series = grid[:, 0]
    return series[::-1] if flip else series


def _cmd_backtest(args) -> None:
    cv = _cv_from_args(args)
    try:
        config = BacktestConfig(
            estimators=args.estimators, paths=args.paths,
            n_assets=args.n_assets, window=args.window,
            min_history=args.min_history, rebalance=args.rebalance,
            parsimony_p=args.parsimony_p,
            periods_per_year=args.periods_per_year, seed=args.seed, cv=cv,
            mle_denominator=args.mle_denominator,
        )
    except ValueError as exc:
        raise UsageError(str(exc))

    raw_grid, labels = read_panel(args.input)
    if labels is None:
        labels = tuple(f"col{j + 1}" for j in range(raw_grid.shape[1]))
    inputs = [args.input]
    # files carry the most recent row first; the backtest walks forward
    grid = raw_grid if args.reverse_rows else raw_grid[::-1]
    market = None
    if args.market is not None:
        market = _read_series(args.market, not args.reverse_rows, "market")
        inputs.append(args.market)
    rf = None
    if args.rf is not None:
        try:
            rf = float(args.rf)
        except ValueError:
            rf = _read_series(args.rf, not args.reverse_rows, "rf")
            inputs.append(args.rf)

    report = backtest(grid, labels, config, market=market, rf=rf)
    if not report.path_stats:
        raise ValueError("no path produced a return series; "
                         "check window and eligibility settings")

    out = _out_dir(args)
    _write_rows(out / "paths.csv",
                ["path", "estimator", "n_periods", "mean", "sd", "sharpe",
                 "annualized_mean", "annualized_sd", "tracking_error",
                 "market_correlation", "failures"],
                [[r["path"], r["estimator"], r["n_periods"], r["mean"],
                  r["sd"], r["sharpe"], r["annualized_mean"],
                  r["annualized_sd"], r["tracking_error"],
                  r["market_correlation"], r["failures"]]
                 for r in report.rows()])

    sharpe = report.metric_matrix("sharpe")
    te = report.metric_matrix("tracking_error")
    corr = report.metric_matrix("market_correlation")
    summary_rows = []
    for j, name in enumerate(report.estimators):
        col = sharpe[:, j]
        ok = np.isfinite(col)
        summary_rows.append([
            name,
            np.median(col[ok]) if ok.any() else np.nan,
            np.nanmedian(te[:, j]) if np.isfinite(te[:, j]).any() else np.nan,
            np.nanmedian(corr[:, j]) if np.isfinite(corr[:, j]).any() else np.nan,
            int(ok.sum()),
        ])
    _write_rows(out / "summary.csv",
                ["estimator", "median_sharpe", "median_tracking_error",
                 "median_market_correlation", "paths"], summary_rows)
    outputs = ["paths.csv", "summary.csv"]
    if not args.no_figures:
        plots.save_metric_boxplot(sharpe, report.estimators,
                                  out / "sharpe_boxplot.png",
                                  ylabel="annualized Sharpe ratio")
        outputs.append("sharpe_boxplot.png")
        if np.isfinite(te).any():
            plots.save_metric_boxplot(te, report.estimators,
                                      out / "tracking_boxplot.png",
                                      ylabel="annualized tracking error")
            outputs.append("tracking_boxplot.png")
    _write_manifest(out, "backtest", args, inputs, outputs)

    table = [[row[0],
              "" if np.isnan(row[1]) else f"{row[1]:.3f}",
              "" if np.isnan(row[2]) else f"{row[2]:.4f}",
              "" if np.isnan(row[3]) else f"{row[3]:.3f}",
              str(row[4])] for row in summary_rows]
    _print_table(["estimator", "median_sharpe", "median_te", "median_corr",
                  "paths"], table)


# ---------------------------------------------------------------- parser

def build_parser() -> _Parser:
    parser = _Parser(prog="monocov",
                     description="Mean/covariance estimation for panels "
                                 "with monotone missingness.")
    parser.add_argument("--version", action="version",
                        version=f"monocov {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="command")

    def add(name: str, help_text: str, handler):
        sub = commands.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--config", default=None,
                         help="file of key = value option defaults")
        sub.set_defaults(func=handler)
        return sub

    sub = add("simulate", "generate a synthetic panel with known truth",
              _cmd_simulate)
    sub.add_argument("--m", type=int, default=10, help="columns (default 10)")
    sub.add_argument("--n", type=int, default=100, help="rows (default 100)")
    sub.add_argument("--distribution", default="mvn", choices=["mvn", "mvt"])
    sub.add_argument("--nu", type=float, default=None,
                     help="Student-t tail weight (default: drawn)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--wishart-df", type=int, default=None,
                     help="inverse-Wishart order (default m+3)")
    sub.add_argument("--wishart-scale", type=float, default=1.0)
    sub.add_argument("--exp-rate", type=float, default=0.5)
    sub.add_argument("--out", default=None, help="output directory")

    sub = add("estimate", "fit the mean and covariance of a panel",
              _cmd_estimate)
    sub.add_argument("input", help="panel csv (most recent row first)")
    sub.add_argument("--method", default="lasso", choices=sorted(ALL_METHODS))
    sub.add_argument("--parsimony-p", type=float, default=0.25,
                     help="least-squares switch point in [0, 1] (default 0.25)")
    sub.add_argument("--factors", default=None,
                     help="factor panel csv prepended to the assets")
    sub.add_argument("--mle-denominator", action="store_true",
                     help="divide variances by n instead of n-1")
    sub.add_argument("--reverse-rows", action="store_true",
                     help="input rows are oldest first")
    _add_cv_flags(sub)
    sub.add_argument("--out", default=None, help="output directory")

    sub = add("evaluate", "score an estimate against a known truth",
              _cmd_evaluate)
    sub.add_argument("--estimate", default=None,
                     help="directory with mean.csv and covariance.csv")
    sub.add_argument("--mean", default=None, help="estimated mean csv")
    sub.add_argument("--covariance", default=None,
                     help="estimated covariance csv")
    sub.add_argument("--truth", default=None,
                     help="directory with truth_mean.csv and truth_cov.csv")
    sub.add_argument("--truth-mean", default=None)
    sub.add_argument("--truth-cov", default=None)
    sub.add_argument("--distribution", default="mvn", choices=["mvn", "mvt"])
    sub.add_argument("--nu", type=float, default=None)
    sub.add_argument("--mc-draws", type=int, default=10000)
    sub.add_argument("--score-seed", type=int, default=0)
    sub.add_argument("--zero-structure", action="store_true",
                     help="also report sparsity of the estimate")
    sub.add_argument("--out", default=None, help="output directory (optional)")

    sub = add("benchmark", "simulation study ranking estimators by ELL",
              _cmd_benchmark)
    sub.add_argument("--m", type=int, default=25)
    sub.add_argument("--n", type=int, default=150)
    sub.add_argument("--trials", type=int, default=30)
    sub.add_argument("--methods", type=_comma_strings, default=("lasso",),
                     help="comma-separated method list")
    sub.add_argument("--parsimony", type=_comma_floats, default=(0.25,),
                     help="comma-separated switch points")
    sub.add_argument("--no-complete", action="store_true",
                     help="drop the complete-data comparator")
    sub.add_argument("--no-observed", action="store_true",
                     help="drop the observed-data comparator")
    sub.add_argument("--distribution", default="mvn", choices=["mvn", "mvt"])
    sub.add_argument("--nu", type=float, default=None)
    sub.add_argument("--mc-draws", type=int, default=10000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mle-denominator", action="store_true")
    _add_cv_flags(sub)
    sub.add_argument("--no-figures", action="store_true",
                     help="skip the png boxplots")
    sub.add_argument("--out", default=None, help="output directory")

    sub = add("portfolio", "long-only minimum-variance weights",
              _cmd_portfolio)
    sub.add_argument("input", help="labeled covariance csv")
    sub.add_argument("--allow-short", action="store_true",
                     help="drop the long-only constraint")
    sub.add_argument("--active-only", action="store_true",
                     help="print only nonzero weights")
    sub.add_argument("--out", default=None, help="output directory (optional)")

    sub = add("backtest", "rolling minimum-variance backtest", _cmd_backtest)
    sub.add_argument("input", help="panel csv (most recent row first)")
    sub.add_argument("--estimators", type=_comma_strings,
                     default=("equal", "complete", "lasso"),
                     help="comma list: equal, complete, observed, a method, "
                          "or f+method")
    sub.add_argument("--market", default=None,
                     help="single-column market return csv")
    sub.add_argument("--rf", default=None,
                     help="risk-free rate: a number or a single-column csv")
    sub.add_argument("--paths", type=int, default=20)
    sub.add_argument("--n-assets", type=int, default=None,
                     help="subsample size per path (default: all assets)")
    sub.add_argument("--window", type=int, default=60)
    sub.add_argument("--min-history", type=int, default=12)
    sub.add_argument("--rebalance", type=int, default=12)
    sub.add_argument("--parsimony-p", type=float, default=0.25)
    sub.add_argument("--periods-per-year", type=int, default=12)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mle-denominator", action="store_true")
    sub.add_argument("--reverse-rows", action="store_true",
                     help="input rows are oldest first")
    _add_cv_flags(sub)
    sub.add_argument("--no-figures", action="store_true")
    sub.add_argument("--out", default=None, help="output directory")

    return parser


_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def _parse_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = body.partition("=")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _apply_config(parser: _Parser, args: argparse.Namespace,
                  argv: list[str]) -> None:
    if getattr(args, "config", None) is None:
        return
    sub_actions = next(
        a for a in parser._actions
        if isinstance(a, argparse._SubParsersAction)
    )
    sub = sub_actions.choices[args.command]
    by_option = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_option[opt[2:]] = action
    given = set()
    for token in argv:
        if token.startswith("--"):
            given.add(token[2:].split("=", 1)[0])
    for key, text in _parse_config_file(Path(args.config)).items():
        action = by_option.get(key)
        if action is None or key == "config":
            raise UsageError(f"unknown config key {key!r}")
        if key in given:
            continue
        if isinstance(action, (argparse._StoreTrueAction,
                               argparse._StoreFalseAction)):
            word = text.lower()
            if word in _TRUE_WORDS:
                value = isinstance(action, argparse._StoreTrueAction)
            elif word in _FALSE_WORDS:
                value = not isinstance(action, argparse._StoreTrueAction)
            else:
                raise UsageError(f"config key {key!r} expects true/false")
        else:
            try:
                value = action.type(text) if action.type else text
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}")
            if action.choices is not None and value not in action.choices:
                raise UsageError(
                    f"config key {key!r}: pick from {sorted(action.choices)}"
                )
        setattr(args, action.dest, value)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.error("a command is required")
    try:
        _apply_config(parser, args, argv)
        args.func(args)
        return 0
    except UsageError as exc:
        print(f"monocov: error: {exc}", file=sys.stderr)
        return 5
    except NonMonotonePattern as exc:
        print(f"monocov: non-monotone input: {exc}", file=sys.stderr)
        return 3
    except PanelError as exc:
        print(f"monocov: bad input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"monocov: bad input: {exc}", file=sys.stderr)
        return 2
    except (DegenerateColumn, RankDeficient, ConvergenceError,
            NonPdCovariance, np.linalg.LinAlgError) as exc:
        print(f"monocov: estimation failed: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"monocov: estimation failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
