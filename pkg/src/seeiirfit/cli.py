"""Command-line workflows: fit, forecast, simulate and diagnose.

Every run writes its delimited outputs, rendered figures and a manifest
(inputs, configuration digest, seed, version) into the output directory,
so a run can be reproduced bit-exactly from the manifest alone.

Exit codes: 0 success, 2 usage or configuration error, 3 data validation
error, 4 convergence/diagnostics failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import metadata

import numpy as np

from . import forecast, mcmc, plots, synth
from .data import (ConfigError, DataError, RunConfig, file_sha256, load_calendar,
                   load_series, read_draws, save_series, write_draws)
from .diagnostics import diagnostics
from .mcmc import ConvergenceError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

CONFIG_DIR_ENV = "SEEIIRFIT_CONFIG_DIR"


def _version() -> str:
    try:
        return metadata.version("seeiirfit")
    except metadata.PackageNotFoundError:
        return "unknown"


def _resolve_config_path(path: str | None) -> str | None:
    """Fall back to the configured default directory for bare config names."""
    if path is None or os.path.exists(path) or os.path.isabs(path):
        return path
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir:
        candidate = os.path.join(env_dir, path)
        if os.path.exists(candidate):
            return candidate
    return path


def _load_config(args, scenario_default: str) -> tuple[RunConfig, str | None]:
    """Resolve and parse the run configuration; returns (config, path used)."""
    path = _resolve_config_path(getattr(args, "config", None))
    if path is None:
        cfg = RunConfig(scenario=scenario_default)
        if args.seed is not None:
            cfg.seed = args.seed
        return cfg, None
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    return RunConfig.from_file(path, scenario_default=scenario_default,
                               seed_override=args.seed), path


def _write_manifest(out_dir: str, command: str, inputs: dict[str, str | None],
                    config: RunConfig | None, seed: int | None,
                    artifacts: list[str]) -> None:
    manifest = {
        "command": command,
        "version": _version(),
        "seed": seed,
        "inputs": {name: {"path": str(path), "sha256": file_sha256(path)}
                   for name, path in inputs.items() if path is not None},
        "config": config.to_dict() if config is not None else None,
        "config_sha256": config.digest() if config is not None else None,
        "artifacts": sorted(artifacts),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_inputs(args):
    calendar = load_calendar(args.calendar) if args.calendar else None
    series = load_series(args.data, calendar=calendar)
    try:
        series.validate_calendar()
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return series, calendar


def _fit_report(draws, report) -> str:
    derived = mcmc.derived_quantities(draws)
    rn = derived["rn"]
    r0 = derived["r0"]
    lines = [
        report.format_table(),
        "",
        f"posterior median R0: {np.median(r0):.3f} "
        f"({np.percentile(r0, 2.5):.3f} - {np.percentile(r0, 97.5):.3f})",
        f"posterior median Rn: {np.median(rn):.3f} "
        f"({np.percentile(rn, 2.5):.3f} - {np.percentile(rn, 97.5):.3f})",
        f"Pr(kappa > 1): {derived['pr_kappa_gt_1']:.3f}",
        "",
        "post-burn-in acceptance rates per chain and block:",
    ]
    with np.errstate(invalid="ignore"):
        rates = draws.accepted / np.maximum(draws.proposed, 1)
    for c in range(draws.n_chains):
        lines.append(f"  chain {c}: " + "  ".join(f"{r:.3f}" for r in rates[c]))
    return "\n".join(lines) + "\n"


def _run_fit(args, scenario_default: str, cut=None) -> int:
    series, calendar = _load_inputs(args)
    config, config_path = _load_config(args, scenario_default)
    kernel = config.build_kernel()
    out = args.out
    os.makedirs(out, exist_ok=True)

    if cut is None:
        w_cut = (int(series.iso_years[-1]), int(series.iso_weeks[-1]))
    else:
        w_cut = cut
    try:
        summary, draws = forecast.prospective_run(series, w_cut, config=config,
                                                  cal=calendar, kernel=kernel)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    report = diagnostics(draws)
    write_draws(draws, os.path.join(out, "draws.csv"))
    summary.to_csv(os.path.join(out, "predictive.csv"))
    with open(os.path.join(out, "diagnostics.txt"), "w", encoding="utf-8") as fh:
        fh.write(_fit_report(draws, report))
    name = "forecast_bands.png" if cut is not None else "fit_bands.png"
    plots.predictive_bands(summary, observed=series.counts, calendar=calendar,
                           title=f"Season {series.season}",
                           path=os.path.join(out, name))
    plots.trace(draws, path=os.path.join(out, "trace.png"))
    artifacts = ["draws.csv", "predictive.csv", "diagnostics.txt", name, "trace.png"]
    _write_manifest(out, "forecast" if cut is not None else "fit",
                    {"data": args.data, "calendar": args.calendar,
                     "config": config_path,
                     "kernel_file": config.kernel_file},
                    config, config.seed, artifacts)
    if report.any_flagged:
        print("convergence diagnostics flagged parameters:", file=sys.stderr)
        print(report.format_table(), file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _cmd_fit(args) -> int:
    return _run_fit(args, scenario_default="uninformative")


def _cmd_forecast(args) -> int:
    return _run_fit(args, scenario_default="informative", cut=args.cut_week)


def _cmd_simulate(args) -> int:
    scenario = synth.load_scenario(args.scenario)
    if args.calendar:
        scenario = dataclasses.replace(scenario, calendar=load_calendar(args.calendar))
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    series, truth = synth.simulate_series(scenario)
    save_series(series, os.path.join(out, "series.csv"))
    with open(os.path.join(out, "latent.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("iso_year,iso_week,new_infections,expected_admissions\n")
        for y, w, inc, mu in zip(series.iso_years, series.iso_weeks,
                                 truth.incidence, truth.expected):
            fh.write(f"{int(y)},{int(w)},{inc:.17g},{mu:.17g}\n")
    plots.series_points(series, latent_expected=truth.expected,
                        title=f"Scenario {scenario.label} ({scenario.mode})",
                        path=os.path.join(out, "series.png"))
    _write_manifest(out, "simulate",
                    {"scenario": args.scenario, "calendar": args.calendar},
                    None, scenario.seed,
                    ["series.csv", "latent.csv", "series.png"])
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    draws = read_draws(args.draws)
    report = diagnostics(draws)
    out = args.out
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "diagnostics.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.format_table() + "\n")
    plots.trace(draws, path=os.path.join(out, "trace.png"))
    _write_manifest(out, "diagnose", {"draws": args.draws}, None, None,
                    ["diagnostics.txt", "trace.png"])
    print(report.format_table())
    if report.any_flagged:
        return EXIT_CONVERGENCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seeiirfit",
        description="Fit and forecast weekly severe-influenza admission counts "
                    "with a Bayesian SEEIIR transmission model.",
    )
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    def add_fit_args(p):
        p.add_argument("--data", required=True, help="weekly series CSV")
        p.add_argument("--calendar", help="school-holiday calendar file")
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", default=".", help="output directory")

    p_fit = sub.add_parser("fit", help="retrospective fit of a full season")
    add_fit_args(p_fit)
    p_fit.set_defaults(func=_cmd_fit)

    p_fc = sub.add_parser("forecast", help="fit up to an analysis week, "
                                           "forecast the rest of the season")
    add_fit_args(p_fc)
    p_fc.add_argument("--cut-week", required=True,
                      help="analysis week, e.g. 2015-W08")
    p_fc.set_defaults(func=_cmd_forecast)

    p_sim = sub.add_parser("simulate", help="generate a synthetic season")
    p_sim.add_argument("--scenario", required=True, help="scenario file")
    p_sim.add_argument("--calendar", help="school-holiday calendar file")
    p_sim.add_argument("--seed", type=int, help="override the scenario seed")
    p_sim.add_argument("--out", default=".", help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_diag = sub.add_parser("diagnose", help="convergence report for a draws CSV")
    p_diag.add_argument("--draws", required=True, help="draws CSV from a fit")
    p_diag.add_argument("--out", default=".", help="output directory")
    p_diag.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
