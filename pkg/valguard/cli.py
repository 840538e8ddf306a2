"""
# CLI - command-line front end for valguard
# Subcommands: run, simgen, figure, validate-config
# Exit codes: 0 ok, 1 unexpected, 2 config, 3 data, 4 degenerate computation, 130 interrupted
"""

import argparse
import json
from pathlib import Path

from valguard import __version__, console, settings
from valguard.config import RunConfig, read_config
from valguard.core import write_dataset
from valguard.engine import compare_models, double_cv, permutation_null
from valguard.errors import ConfigError, PairingError, ValguardError
from valguard.figures import FIGURE_IDS, reproduce_figure
from valguard.reporting import (
    boxplot_data,
    comparison_table,
    cv_curve_data,
    null_histogram_data,
    validate_report_dict,
)
from valguard.simgen import SCENARIOS, ScenarioSpec, build_scenario


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got '{text}'")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got '{text}'")
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key} must be numeric")
    return key, int(number) if number.is_integer() and "." not in value else number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valguard", description="Leakage-safe double cross-validation engine")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--quiet", action="store_true", help="only print failures")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="validate the pipelines of a config")
    run.add_argument("--config", required=True, help="JSON run config")
    run.add_argument("--seed", type=_seed, help="overrides the config seed")
    run.add_argument("--out", help="output directory (default: next to the config)")
    run.add_argument("--threads", type=_positive, help="worker threads (default: VALGUARD_THREADS or 1)")
    run.add_argument("--demonstrate-leakage", action="store_true",
                     help="allow leaky pipelines; the config must opt in too")

    simgen = sub.add_parser("simgen", help="write a simulated dataset as CSV")
    simgen.add_argument("--scenario", required=True, choices=SCENARIOS)
    simgen.add_argument("--seed", type=_seed, default=0)
    simgen.add_argument("--out", required=True, help="output directory")
    simgen.add_argument("--param", type=_param, action="append", default=[], help="scenario parameter key=value")

    figure = sub.add_parser("figure", help="reproduce a simulated figure as plot-data CSVs")
    figure.add_argument("--id", type=int, required=True, dest="figure_id", help=f"one of {FIGURE_IDS}")
    figure.add_argument("--seed", type=_seed, default=0)
    figure.add_argument("--out", required=True, help="output directory")
    figure.add_argument("--threads", type=_positive)

    validate = sub.add_parser("validate-config", help="check a config and print its normalized form")
    validate.add_argument("--config", required=True)
    return parser


def _threads(args) -> int:
    return args.threads if args.threads else settings.env_threads()


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def execute_run(cfg: RunConfig, out_dir: Path, threads: int, demonstrate_leakage: bool) -> Path:
    """Every pipeline's double CV, optional permutation nulls, pairwise comparisons and output files."""
    if cfg.demonstrate_leakage != demonstrate_leakage:
        raise ConfigError("leakage demonstration needs both the config flag and --demonstrate-leakage",
                          "demonstrate_leakage")
    ds = cfg.load_data()
    console.status(f"📊 dataset: {ds.n_rows} rows x {ds.n_vars} variables, {len(cfg.pipelines)} pipeline(s)")
    reports = []
    for spec in cfg.pipelines:
        report = double_cv(ds, spec, threads, demonstrate_leakage, cfg.n_boot)
        if cfg.permutation.enabled:
            report.attach_null(permutation_null(ds, spec, cfg.permutation.n_perm, cfg.permutation.block,
                                                threads, demonstrate_leakage, report=report))
        reports.append(report)

    comparisons = []
    for i, a in enumerate(reports):
        for b in reports[i + 1:]:
            try:
                comparisons.append(compare_models(a, b))
            except PairingError as e:
                console.warn(f"'{a.pipeline_name}' vs '{b.pipeline_name}' not compared: {e}")

    payloads = [r.to_dict(timings=False) for r in reports]
    for payload in payloads:
        validate_report_dict(payload)
    report_path = _write_json(out_dir / cfg.outputs.report_path, {
        "schema_version": settings.SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "reports": payloads,
        "comparisons": [c.to_dict(timings=False) for c in comparisons],
    })
    _write_json(report_path.with_name(f"{report_path.stem}_timings.json"),
                {r.pipeline_name: [rep.seconds for rep in r.per_repetition] for r in reports})

    curves_dir = out_dir / cfg.outputs.curves_dir
    for r in reports:
        cv_curve_data(r).write(curves_dir)
        if r.null_distribution is not None:
            null_histogram_data(r).write(curves_dir)
    boxplot_data(reports).write(curves_dir)
    if comparisons:
        comparison_table(comparisons).write(curves_dir)
    for c in comparisons:
        console.step(f"   {c.model_names[0]} vs {c.model_names[1]}: p = {c.p_value:.4f} ({c.test_method})")
    return report_path


def _run(args) -> int:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out_dir = Path(args.out) if args.out else cfg.base_dir
    report_path = execute_run(cfg, out_dir, _threads(args), args.demonstrate_leakage)
    console.success(f"✅ report written to {report_path}")
    print(report_path)
    return 0


def _simgen(args) -> int:
    spec = ScenarioSpec(args.scenario, dict(args.param), args.seed)
    scenario = build_scenario(spec)
    out_dir = Path(args.out)
    path = write_dataset(scenario.dataset, out_dir / f"{spec.name}_seed{spec.seed}.csv")
    if scenario.informative is not None:
        _write_json(out_dir / f"{spec.name}_seed{spec.seed}_informative.json",
                    {"informative": scenario.informative.tolist(), "scenario": spec.to_dict()})
    console.success(f"✅ {spec.name}: {scenario.dataset.n_rows} rows written")
    print(path)
    return 0


def _figure(args) -> int:
    result = reproduce_figure(args.figure_id, args.seed, args.out, _threads(args))
    print(result.paths[-1])
    return 0


def _validate_config(args) -> int:
    cfg = read_config(args.config)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    console.success(f"✅ {args.config}: {len(cfg.pipelines)} pipeline(s), config is valid")
    return 0


_COMMANDS = {"run": _run, "simgen": _simgen, "figure": _figure, "validate-config": _validate_config}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quiet:
        console.set_quiet(True)
    try:
        return _COMMANDS[args.command](args)
    except ValguardError as e:
        console.failure(f"{type(e).__name__}: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        console.warn("interrupted")
        return 130
    except Exception as e:
        console.failure(f"unexpected error: {type(e).__name__}: {e}")
        return 1
