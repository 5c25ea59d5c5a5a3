"""Command-line pipeline: ingestion, fitting, frontier and information
analyses, report and plot emission.

One concern per subcommand; composition happens through files and pipes.
Every subcommand writes a JSON report (machine document) plus a rendered
text twin, delimited plot data as CSV, and optionally SVG figures.

Exit codes: 0 success, 1 analysis-level failure (non-convergence),
2 input parse error, 3 record invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__, analysis, infotheory, io, synth
from .errors import IngestError, ScaleLawsError
from .frontier import build_pareto, data_scaling_exponent, fit_nopt, hull_points
from .lawcore import (
    PF_DAY_FLOPS,
    PurePowerLaw,
    ScalingLaw,
    Split,
    Variable,
    compare_rescaled,
    eval_law,
)
from .powerfit import (
    ALPHA_STARTS,
    FitOptions,
    FitReport,
    fit_below_frontier,
    fit_power_plus_const,
)

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_PARSE = 2
EXIT_INVARIANT = 3

#: FitOptions fields settable from the key-value config file.
_CONFIG_FIELDS = {
    "max_iterations": int,
    "tolerance": float,
    "linf_grid_size": int,
    "bootstrap_replicates": int,
    "seed": int,
    "asymmetry": float,
}


def build_fit_options(config_path: Optional[str], cli_seed: Optional[int],
                      cli_asymmetry: Optional[float] = None) -> FitOptions:
    """FitOptions defaults, overridden by config file, environment, then flags."""
    values: dict = {}
    if config_path:
        raw = io.read_config(config_path)
        for key, value in raw.items():
            if key not in _CONFIG_FIELDS:
                raise IngestError(f"{config_path}: unknown config key {key!r}")
            values[key] = _CONFIG_FIELDS[key](value)
    env_seed = os.environ.get(io.SEED_ENV_VAR)
    if env_seed is not None:
        values["seed"] = int(env_seed)
    if cli_seed is not None:
        values["seed"] = cli_seed
    if cli_asymmetry is not None:
        values["asymmetry"] = cli_asymmetry
    return FitOptions(**values)


def _opts_settings(opts: FitOptions) -> dict:
    return {
        "max_iterations": opts.max_iterations,
        "tolerance": opts.tolerance,
        "linf_grid_size": opts.linf_grid_size,
        "alpha_starts": list(opts.alpha_starts),
        "bootstrap_replicates": opts.bootstrap_replicates,
        "ci_percentiles": list(opts.ci_percentiles),
        "asymmetry": opts.asymmetry,
        "pf_day_flops": PF_DAY_FLOPS,
    }


def _emit(args, command: str, inputs: dict, settings: dict, results: dict,
          seed: Optional[int] = None) -> None:
    report = io.build_report(command, inputs, settings, results, seed=seed)
    io.write_report(args.out + ".json", report)
    with open(args.out + ".txt", "w", encoding="utf-8") as fh:
        fh.write(io.render_report_text(report))


def _write_fit_artifacts(args, report: FitReport, points, variable: str) -> None:
    """Plot CSVs (observed points, 200-sample fitted curve with its
    reducible-only view) and optional SVG figures."""
    from .plots import curve_samples, save_fit_figure

    pts = np.asarray(points, dtype=float)
    io.write_csv(args.out + "_points.csv", ["x", "loss"], pts)
    samples = curve_samples(report.law, pts[:, 0].min(), pts[:, 0].max(), n=200)
    io.write_csv(args.out + "_curve.csv", ["x", "loss", "reducible_loss"], samples)
    if getattr(args, "plots", False):
        save_fit_figure(args.out + ".svg", pts, report.law, variable=variable)
        if isinstance(report.law, ScalingLaw):
            save_fit_figure(args.out + "_reducible.svg", pts, report.law,
                            variable=variable, reducible_only=True)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest_check(args) -> int:
    runs = io.read_runs(args.runs)
    print(f"ok: {len(runs)} runs, {sum(len(r.series) for r in runs)} series points")
    return EXIT_OK


def _model_size_points(runs) -> list[tuple[float, float]]:
    pts = []
    for run in runs:
        losses = [p.loss for p in run.series if p.split is Split.TEST]
        if losses:
            pts.append((float(run.n_params), min(losses)))
    return pts


def _data_points(runs) -> list[tuple[float, float]]:
    merged = sorted(
        (p.tokens, p.loss)
        for run in runs
        for p in run.series
        if p.split is Split.TEST
    )
    best = math.inf
    out = []
    for tokens, loss in merged:
        if loss < best:
            out.append((tokens, loss))
            best = loss
    return out


def cmd_fit(args) -> int:
    opts = build_fit_options(args.config, args.seed)
    runs = io.read_runs(args.runs)
    variable = Variable(args.variable)
    settings = _opts_settings(opts)
    results: dict = {}
    if variable is Variable.COMPUTE:
        frontier = hull_points(build_pareto(runs, smooth_window=args.smooth_window))
        points = [(p.compute, p.loss) for p in frontier.hull]
        report = fit_below_frontier(points, opts)
        settings["point_selection"] = "convex-hull-of-compute-frontier"
        io.write_csv(
            args.out + "_frontier.csv",
            ["compute_pf_days", "loss", "run_id", "n_params", "on_hull"],
            [
                (p.compute, p.loss, p.run_id, p.n_params, int(p in frontier.hull))
                for p in frontier.pareto
            ],
        )
    elif variable is Variable.MODEL_SIZE:
        points = _model_size_points(runs)
        report = fit_power_plus_const(points, opts, variable=variable)
        settings["point_selection"] = "min-test-loss-per-run"
    elif variable is Variable.DATASET_SIZE:
        points = _data_points(runs)
        report = fit_power_plus_const(points, opts, variable=variable)
        settings["point_selection"] = "running-min-over-tokens"
    else:
        raise IngestError(f"unsupported fit variable {args.variable!r}")
    if args.bootstrap:
        from .powerfit import bootstrap_ci

        kind = "below_frontier" if variable is Variable.COMPUTE else "power_plus_const"
        report = bootstrap_ci(points, kind, opts)
    results["fit"] = io.fit_to_dict(report)
    _emit(args, "fit", {"runs": args.runs}, settings, results, seed=opts.seed)
    _write_fit_artifacts(args, report, points, variable.value)
    return EXIT_OK if report.converged else EXIT_ANALYSIS


def cmd_frontier(args) -> int:
    runs = io.read_runs(args.runs)
    frontier = hull_points(build_pareto(runs, smooth_window=args.smooth_window))
    io.write_csv(
        args.out + "_frontier.csv",
        ["compute_pf_days", "loss", "run_id", "n_params", "on_hull"],
        [
            (p.compute, p.loss, p.run_id, p.n_params, int(p in frontier.hull))
            for p in frontier.pareto
        ],
    )
    results = {
        "pareto_points": len(frontier.pareto),
        "hull_points": len(frontier.hull),
        "hull": [
            {"compute_pf_days": p.compute, "loss": p.loss, "run_id": p.run_id, "n_params": p.n_params}
            for p in frontier.hull
        ],
    }
    _emit(args, "frontier", {"runs": args.runs},
          {"smooth_window": args.smooth_window, "pf_day_flops": PF_DAY_FLOPS}, results)
    if args.plots:
        from .plots import save_frontier_figure

        save_frontier_figure(args.out + ".svg", frontier.pareto, frontier.hull)
    return EXIT_OK


def cmd_nopt(args) -> int:
    runs = io.read_runs(args.runs)
    frontier = hull_points(build_pareto(runs, smooth_window=args.smooth_window))
    report = fit_nopt(frontier)
    beta = report.law.exponent
    results = {
        "fit": io.fit_to_dict(report),
        "beta": beta,
        "data_scaling_exponent": data_scaling_exponent(beta) if 0 < beta < 1 else None,
    }
    _emit(args, "nopt", {"runs": args.runs},
          {"smooth_window": args.smooth_window, "pf_day_flops": PF_DAY_FLOPS}, results)
    points = [(p.compute, p.n_params) for p in frontier.hull]
    _write_fit_artifacts(args, report, points, "compute")
    return EXIT_OK if report.converged else EXIT_ANALYSIS


def cmd_forecast(args) -> int:
    fit = io.read_fit(args.fit)
    if not isinstance(fit.law, ScalingLaw):
        raise IngestError("forecast needs a power-plus-constant fit")
    x = analysis.forecast_x_for_reducible(fit.law, args.target)
    results = {
        "target_reducible_nats": args.target,
        "x": x,
        "variable": fit.law.variable.value,
        "loss_at_x": eval_law(fit.law, x),
    }
    _emit(args, "forecast", {"fit": args.fit}, {}, results)
    return EXIT_OK


def cmd_rescale(args) -> int:
    fit = io.read_fit(args.fit)
    if not isinstance(fit.law, ScalingLaw):
        raise IngestError("rescale needs a power-plus-constant fit")
    results: dict = {}
    if args.expect_irreducible is not None and args.expect_scale is not None:
        comparison = compare_rescaled(
            fit.law, args.tokens_per_example, args.expect_irreducible, args.expect_scale
        )
        results["derived"] = io.law_to_dict(comparison.derived)
        results["irreducible_rel_diff"] = comparison.irreducible_rel_diff
        results["scale_rel_diff"] = comparison.scale_rel_diff
        results["irreducible_discrepant"] = comparison.irreducible_discrepant
        results["scale_discrepant"] = comparison.scale_discrepant
    else:
        from .lawcore import rescale_loss

        results["derived"] = io.law_to_dict(rescale_loss(fit.law, args.tokens_per_example))
    _emit(args, "rescale", {"fit": args.fit},
          {"tokens_per_example": args.tokens_per_example}, results)
    return EXIT_OK


def cmd_consistency(args) -> int:
    ld = io.read_fit(args.ld)
    lc = io.read_fit(args.lc)
    nopt = io.read_fit(args.nopt)
    if not isinstance(ld.law, ScalingLaw) or not isinstance(lc.law, ScalingLaw):
        raise IngestError("L(D) and L(C) must be power-plus-constant fits")
    if not isinstance(nopt.law, PurePowerLaw):
        raise IngestError("nopt must be a pure power law fit")
    report = analysis.consistency_check(ld.law, nopt.law, lc.law, perturb=args.perturb)
    results = {
        "intersection_compute_pf_days": report.intersection_compute,
        "intersection_tokens": report.intersection_tokens,
        "band_pf_days": list(report.band),
        "residual_nats": None if math.isnan(report.residual) else report.residual,
        "no_intersection": report.no_intersection,
        "band_brackets_point": report.band_brackets_point,
    }
    settings = {
        "perturb": args.perturb,
        "bracket_pf_days": list(report.bracket),
        "ln_tolerance": report.ln_tolerance,
        "intersection_solved_on": "reducible components only",
    }
    _emit(args, "consistency", {"ld": args.ld, "lc": args.lc, "nopt": args.nopt},
          settings, results)
    return EXIT_OK


def cmd_percentiles(args) -> int:
    opts = build_fit_options(args.config, args.seed)
    sizes, matrix = io.read_matrix_csv(args.matrix)
    percentiles = tuple(float(p) for p in args.percentiles.split(","))
    reports = analysis.percentile_trends(sizes, matrix, percentiles, opts)
    results = {
        "percentiles": list(percentiles),
        "fits": {str(p): io.fit_to_dict(r) for p, r in zip(percentiles, reports)},
    }
    settings = _opts_settings(opts)
    settings["percentile_definition"] = "nearest-rank"
    _emit(args, "percentiles", {"matrix": args.matrix}, settings, results, seed=opts.seed)
    rows = []
    sorted_rows = np.sort(matrix, axis=1)
    for n, row in zip(sizes, sorted_rows):
        rows.append([n] + [analysis.nearest_rank_percentile(row, p) for p in percentiles])
    io.write_csv(args.out + "_percentiles.csv",
                 ["n_params"] + [f"p{p:g}" for p in percentiles], rows)
    return EXIT_OK if all(r.converged for r in reports) else EXIT_ANALYSIS


def cmd_mi(args) -> int:
    rows = io.read_mi_csv(args.losses)
    per_row = []
    mi_points, ig_points = [], []
    for n, l_un, l_cond, l_text in rows:
        est = infotheory.mutual_info(float(l_un), float(l_cond))
        gain = infotheory.infogain(est.mi, float(l_text))
        per_row.append({
            "n_params": float(n),
            "mi_nats": float(est.mi),
            "infogain": float(gain.infogain),
            "noise_flag": bool(est.noise_flag),
            "over_unity": bool(gain.over_unity),
        })
        mi_points.append((float(n), float(est.mi)))
        ig_points.append((float(n), float(gain.infogain)))
    results: dict = {"rows": per_row}
    if len({n for n, _ in mi_points}) >= 2:
        mi_fit = infotheory.fit_log_mi(mi_points)
        ig_fit = infotheory.fit_log_mi(ig_points)
        results["mi_log_fit"] = dataclasses.asdict(mi_fit)
        results["infogain_log_fit"] = dataclasses.asdict(ig_fit)
        if args.target_infogain is not None and ig_fit.increasing:
            results["n_for_target_infogain"] = infotheory.invert_log_mi(
                ig_fit, args.target_infogain
            )
    if args.nats_per_word is not None:
        for row in per_row:
            row["words_equivalent"] = infotheory.words_equivalent(
                row["mi_nats"], args.nats_per_word
            )
    _emit(args, "mi", {"losses": args.losses},
          {"nats_per_word": args.nats_per_word}, results)
    io.write_csv(args.out + "_mi.csv",
                 ["n_params", "mi_nats", "infogain"],
                 [(r["n_params"], r["mi_nats"], r["infogain"]) for r in per_row])
    return EXIT_OK


def cmd_context(args) -> int:
    opts = build_fit_options(args.config, args.seed)
    profile = io.read_xy_csv(args.profile)
    model = infotheory.fit_context_profile(profile, opts)
    results = {
        "l_model": model.l_model,
        "l_unigram": model.l_unigram,
        "p": model.p,
        "horizon": model.horizon,
        "mi_nats": infotheory.context_mi(model),
        "infogain": infotheory.context_infogain(model),
    }
    settings = _opts_settings(opts)
    _emit(args, "context", {"profile": args.profile}, settings, results, seed=opts.seed)
    return EXIT_OK


def cmd_scan_opt(args) -> int:
    points = io.read_xy_csv(args.scan, expected_header=["aspect_ratio", "loss"])
    opt = analysis.scan_optimum(points)
    results = {
        "optimal_ratio": opt.ratio,
        "loss_at_optimum": opt.loss,
        "curvature": None if math.isnan(opt.curvature) else opt.curvature,
        "at_boundary": opt.at_boundary,
    }
    _emit(args, "scan-opt", {"scan": args.scan}, {}, results)
    return EXIT_OK


#: Named synthetic families for end-to-end pipeline checks.  Each preset
#: pins its sampling grids too: the optimal-model-size trajectory must stay
#: interior to the (N, E) grids or edge runs flatten the recovered exponent.
SYNTH_PRESETS = {
    "beta07": (
        synth.SynthFamily(l_inf=0.5, n_scale=1e3, alpha_n=0.3, e_scale=1e7, alpha_e=0.7),
        {"n_min": 1e3, "n_max": 1e10, "e_min": 3e7, "e_max": 5e10},
    ),
    "beta05": (
        synth.SynthFamily(l_inf=0.5, n_scale=1e3, alpha_n=0.5, e_scale=1e7, alpha_e=0.5),
        {"n_min": 1e3, "n_max": 1e9, "e_min": 1e7, "e_max": 1e13},
    ),
    "beta03": (
        synth.SynthFamily(l_inf=0.5, n_scale=1e3, alpha_n=0.7, e_scale=1e7, alpha_e=0.3),
        {"n_min": 1e3, "n_max": 1e7, "e_min": 2e5, "e_max": 6e13},
    ),
}

_SYNTH_GRID_DEFAULTS = {
    "n_min": 1e4, "n_max": 1e12, "n_sizes": 20,
    "e_min": 1e6, "e_max": 1e14, "e_points": 200,
}


def cmd_synth(args) -> int:
    grid = dict(_SYNTH_GRID_DEFAULTS)
    if args.preset:
        family, preset_grid = SYNTH_PRESETS[args.preset]
        grid.update(preset_grid)
        if args.noise_sigma or args.seed:
            family = dataclasses.replace(
                family,
                noise_sigma=args.noise_sigma or family.noise_sigma,
                seed=args.seed if args.seed is not None else family.seed,
            )
    else:
        family = synth.SynthFamily(
            l_inf=args.l_inf, n_scale=args.n_scale, alpha_n=args.alpha_n,
            e_scale=args.e_scale, alpha_e=args.alpha_e,
            noise_sigma=args.noise_sigma, seed=args.seed or 0,
        )
    for key in grid:
        if getattr(args, key) is not None:
            grid[key] = getattr(args, key)
    sizes = np.logspace(math.log10(grid["n_min"]), math.log10(grid["n_max"]), grid["n_sizes"])
    sizes = np.unique(np.round(sizes).astype(int)).astype(float)
    tokens = np.logspace(math.log10(grid["e_min"]), math.log10(grid["e_max"]), grid["e_points"])
    runs = synth.gen_curves(family, sizes, tokens)
    if args.out == "-":
        io.write_runs(sys.stdout, runs)
    else:
        io.write_runs(args.out, runs)
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    sys.stdout.write(io.render_report_text(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p, out_default: str):
    p.add_argument("--out", default=out_default, help="output path prefix")
    p.add_argument("--config", default=None, help="key=value config file for fit defaults")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--plots", action="store_true", help="also render SVG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalelaws", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate a JSONL run log")
    p.add_argument("--runs", required=True)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("fit", help="fit a loss scaling law from runs")
    p.add_argument("--runs", required=True)
    p.add_argument("--variable", default="compute", choices=["compute", "model-size", "data"])
    p.add_argument("--smooth-window", type=int, default=0)
    p.add_argument("--bootstrap", action="store_true", help="add bootstrap CIs")
    _add_common(p, "fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("frontier", help="extract the compute-efficient frontier")
    p.add_argument("--runs", required=True)
    p.add_argument("--smooth-window", type=int, default=0)
    _add_common(p, "frontier")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("nopt", help="fit the optimal-model-size power law")
    p.add_argument("--runs", required=True)
    p.add_argument("--smooth-window", type=int, default=0)
    _add_common(p, "nopt")
    p.set_defaults(func=cmd_nopt)

    p = sub.add_parser("forecast", help="abscissa for a target reducible loss")
    p.add_argument("--fit", required=True)
    p.add_argument("--target", type=float, required=True)
    _add_common(p, "forecast")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("rescale", help="convert a per-token law to per-example")
    p.add_argument("--fit", required=True)
    p.add_argument("--tokens-per-example", type=float, required=True)
    p.add_argument("--expect-irreducible", type=float, default=None)
    p.add_argument("--expect-scale", type=float, default=None)
    _add_common(p, "rescale")
    p.set_defaults(func=cmd_rescale)

    p = sub.add_parser("consistency", help="data-vs-compute trend intersection")
    p.add_argument("--ld", required=True, help="L(D) fit JSON")
    p.add_argument("--lc", required=True, help="L(C) fit JSON")
    p.add_argument("--nopt", required=True, help="N_opt(C) fit JSON")
    p.add_argument("--perturb", type=float, default=0.05)
    _add_common(p, "consistency")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("percentiles", help="per-percentile loss trends")
    p.add_argument("--matrix", required=True, help="per-example loss matrix CSV")
    p.add_argument("--percentiles", default="1,5,20,50,80,95,99")
    _add_common(p, "percentiles")
    p.set_defaults(func=cmd_percentiles)

    p = sub.add_parser("mi", help="mutual information and infogain from paired losses")
    p.add_argument("--losses", required=True, help="CSV of paired losses")
    p.add_argument("--target-infogain", type=float, default=None)
    p.add_argument("--nats-per-word", type=float, default=None)
    _add_common(p, "mi")
    p.set_defaults(func=cmd_mi)

    p = sub.add_parser("context", help="context-position loss model and MI")
    p.add_argument("--profile", required=True, help="CSV of (position, loss)")
    _add_common(p, "context")
    p.set_defaults(func=cmd_context)

    p = sub.add_parser("scan-opt", help="optimum of an aspect-ratio scan")
    p.add_argument("--scan", required=True, help="CSV aspect_ratio,loss")
    _add_common(p, "scan-opt")
    p.set_defaults(func=cmd_scan_opt)

    p = sub.add_parser("synth", help="generate synthetic run logs")
    p.add_argument("--preset", choices=sorted(SYNTH_PRESETS), default=None)
    p.add_argument("--l-inf", type=float, default=0.5)
    p.add_argument("--n-scale", type=float, default=1e3)
    p.add_argument("--alpha-n", type=float, default=0.3)
    p.add_argument("--e-scale", type=float, default=1e7)
    p.add_argument("--alpha-e", type=float, default=0.7)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-min", type=float, default=None)
    p.add_argument("--n-max", type=float, default=None)
    p.add_argument("--n-sizes", type=int, default=None)
    p.add_argument("--e-min", type=float, default=None)
    p.add_argument("--e-max", type=float, default=None)
    p.add_argument("--e-points", type=int, default=None)
    p.add_argument("--out", default="-", help="output path, or - for stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render a report JSON as text")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT if exc.run_id is not None else EXIT_PARSE
    except ScaleLawsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
