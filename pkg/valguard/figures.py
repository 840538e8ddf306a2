"""
# Figures - reproduce the simulated experiments as plot-ready CSVs
# Each figure writes its tables plus summary.json with the headline numbers
# Rendering is left to whatever plotting tool reads the CSVs
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from valguard import console, settings
from valguard.core import RngStream
from valguard.dataprep import SplitPolicy
from valguard.engine import PipelineSpec, compare_models, double_cv, inner_cv_select, permutation_null
from valguard.errors import ConfigError, EmptySelectionError
from valguard.metrics import MetricSpec, classification_counts, nmc, roc_curve, wmc
from valguard.plsfamily import SelectionSpec, apply_selection, fit_pipeline_model
from valguard.reporting import (
    PlotData,
    boxplot_data,
    comparison_table,
    cv_curve_data,
    null_histogram_data,
    watermarked,
)
from valguard.simgen import gen_classifier_scores, gen_fig4, gen_fig5, gen_fig6

FIGURE_IDS = (1, 2, 3, 4, 5, 6)

ROC_REPLICATES = 10
COUNT_REPLICATES = 20
FIG3_THRESHOLDS = (0.7, 0.99)
FIG6_REPETITIONS = 10
FIG6_PERMUTATIONS = 19
# slope 1 and center 0 emit plain logistic(latent) scores
LITERAL_MAPPING = {"slope": 1.0, "center": 0.0}


@dataclass
class FigureResult:
    figure_id: int
    summary: dict
    paths: list[Path] = field(default_factory=list)


def _tag(fraction: float) -> str:
    return f"{fraction * 100:g}pct"


# Figures 1-3: imbalanced classifier scores
def _figure1(seed: int, out: Path, threads: int) -> FigureResult:
    root = RngStream(seed)
    result = FigureResult(1, {})
    for i, fraction in enumerate((0.3, 0.01)):
        aurocs = []
        for rep in range(ROC_REPLICATES):
            labels, scores = gen_classifier_scores(1000, fraction, settings.DEFAULT_DPRIME, root.spawn(i, rep))
            curve = roc_curve(scores, labels, 1.0)
            result.paths.append(curve.to_csv(out / f"roc_{_tag(fraction)}_rep{rep:02d}.csv"))
            aurocs.append(curve.auroc)
        result.summary[_tag(fraction)] = {
            "auroc": aurocs,
            "min": min(aurocs),
            "max": max(aurocs),
            "spread": max(aurocs) - min(aurocs),
        }
        console.step(f"   {_tag(fraction)} minority: AUROC {min(aurocs):.3f} .. {max(aurocs):.3f}")
    low, high = result.summary["1pct"]["spread"], result.summary["30pct"]["spread"]
    result.summary["spread_ratio"] = low / high if high else None
    return result


def _count_replicates(seed: int, fraction: float, **mapping):
    root = RngStream(seed)
    for rep in range(COUNT_REPLICATES):
        yield rep, *gen_classifier_scores(1000, fraction, settings.DEFAULT_DPRIME, root.spawn(rep), **mapping)


def _nmc_frame(seed: int, **mapping) -> pd.DataFrame:
    rows = []
    for rep, labels, scores in _count_replicates(seed, 0.01, **mapping):
        counts = classification_counts(labels, (scores > 0.5).astype(float), 1.0, known_labels=[0.0, 1.0])
        naive = classification_counts(labels, np.zeros_like(labels), 1.0, known_labels=[0.0, 1.0])
        rows.append({"replicate": rep, "n_positive": int(labels.sum()),
                     "nmc_classifier": nmc(counts), "nmc_always_negative": nmc(naive)})
    return pd.DataFrame(rows)


def _nmc_summary(frame: pd.DataFrame) -> dict:
    return {
        "median_nmc_classifier": float(frame["nmc_classifier"].median()),
        "median_nmc_always_negative": float(frame["nmc_always_negative"].median()),
        "fraction_classifier_worse": float(np.mean(frame["nmc_classifier"] > frame["nmc_always_negative"])),
    }


def _figure2(seed: int, out: Path, threads: int) -> FigureResult:
    frame = _nmc_frame(seed)
    summary = _nmc_summary(frame)
    summary["literal_mapping"] = _nmc_summary(_nmc_frame(seed, **LITERAL_MAPPING))
    return FigureResult(2, summary, [PlotData("nmc_1pct", frame).write(out)])


def _wmc_frame(seed: int, **mapping) -> pd.DataFrame:
    rows = []
    for rep, labels, scores in _count_replicates(seed, 0.01, **mapping):
        row = {"replicate": rep}
        for threshold in FIG3_THRESHOLDS:
            counts = classification_counts(labels, (scores > threshold).astype(float), 1.0, known_labels=[0.0, 1.0])
            row[f"wmc_t{threshold:g}"] = wmc(counts)
        naive = classification_counts(labels, np.zeros_like(labels), 1.0, known_labels=[0.0, 1.0])
        row["wmc_always_negative"] = wmc(naive)
        rows.append(row)
    return pd.DataFrame(rows)


def _wmc_summary(frame: pd.DataFrame) -> dict:
    medians = {column: float(frame[column].median()) for column in frame.columns if column != "replicate"}
    return {
        "median_wmc": medians,
        "ordering_holds": medians["wmc_t0.7"] < medians["wmc_t0.99"] < medians["wmc_always_negative"],
    }


def _figure3(seed: int, out: Path, threads: int) -> FigureResult:
    frame = _wmc_frame(seed)
    summary = {"weights": {"w_fp": settings.WMC_WEIGHT_FP, "w_fn": settings.WMC_WEIGHT_FN}, **_wmc_summary(frame)}
    summary["literal_mapping"] = _wmc_summary(_wmc_frame(seed, **LITERAL_MAPPING))
    return FigureResult(3, summary, [PlotData("wmc_1pct", frame).write(out)])


# Figures 4-6: PLS validation
def _figure4(seed: int, out: Path, threads: int) -> FigureResult:
    ds = gen_fig4(RngStream(seed))
    spec = PipelineSpec(name="fig4", n_lv_grid=tuple(range(7)), metric=MetricSpec.from_name("press"), seed=seed)
    selection = inner_cv_select(ds, spec, RngStream(seed).spawn(0))
    curve = selection.curve
    frame = pd.DataFrame({"n_lv": list(curve), "press": list(curve.values())})
    best_other = min(v for a, v in curve.items() if a > 0)
    summary = {
        "press_0lv": curve[0],
        "min_press_with_lvs": best_other,
        "relative_improvement": (curve[0] - best_other) / curve[0],
        "chosen_n_lv": selection.chosen.n_lv,
    }
    console.step(f"   PRESS at 0 LV = {curve[0]:.2f}, best with LVs = {best_other:.2f}")
    return FigureResult(4, summary, [PlotData("cv_curve_fig4", frame).write(out)])


def _fig5_spec(seed: int, leaky: bool) -> PipelineSpec:
    return PipelineSpec(
        name="leaky VIP-PLS" if leaky else "in-loop VIP-PLS",
        selection_grid=tuple(SelectionSpec("vip", threshold=t) for t in (1.0, 1.5, 2.0, 2.5)),
        n_lv_grid=(0, 1, 2, 3),
        seed=seed,
        leaky=leaky,
    )


def _predictions_data(report, name: str) -> PlotData:
    pred = report.per_repetition[0].predictions
    frame = pd.DataFrame({
        "row_id": pred["row_ids"],
        "y_true": np.asarray(pred["y_true"])[:, 0],
        "y_pred": np.asarray(pred["y_pred"])[:, 0],
    })
    return PlotData(name, watermarked(frame, [report.watermark] * len(frame)))


def _figure5(seed: int, out: Path, threads: int) -> FigureResult:
    ds = gen_fig5(RngStream(seed))
    leaky = double_cv(ds, _fig5_spec(seed, True), threads, demonstrate_leakage=True)
    in_loop = double_cv(ds, _fig5_spec(seed, False), threads)
    paths = [
        _predictions_data(leaky, "predictions_fig5_leaky").write(out),
        _predictions_data(in_loop, "predictions_fig5_in_loop").write(out),
        cv_curve_data(leaky).write(out),
        cv_curve_data(in_loop).write(out),
    ]
    summary = {
        "q2_leaky": leaky.summary["median"],
        "q2_in_loop": in_loop.summary["median"],
        "difference": leaky.summary["median"] - in_loop.summary["median"],
        "leaky_watermark": leaky.watermark,
    }
    return FigureResult(5, summary, paths)


def fig6_pipelines(seed: int, n_repetitions: int = FIG6_REPETITIONS) -> list[PipelineSpec]:
    common = {
        "n_lv_grid": tuple(range(6)),
        "outer_policy": SplitPolicy(n_folds=5),
        "inner_policy": SplitPolicy(n_folds=5),
        "n_repetitions": n_repetitions,
        "seed": seed,
    }
    return [
        PipelineSpec(name="PLS", **common),
        PipelineSpec(name="SR-PLS", selection_grid=tuple(SelectionSpec("sr", threshold=t) for t in (0.5, 1.0, 2.0)),
                     **common),
        PipelineSpec(name="VIP-PLS", selection_grid=tuple(SelectionSpec("vip", threshold=t) for t in (0.8, 1.0, 1.5)),
                     **common),
        PipelineSpec(name="sPLS", model="sparse_pls",
                     selection_grid=tuple(SelectionSpec("sparse", keep_k=k) for k in (5, 10, 20, 50)), **common),
    ]


def vip_overlap(ds, informative: np.ndarray, n_lv: int, threshold: float = settings.VIP_THRESHOLD) -> int:
    """Ground-truth variables among those a full-data VIP filter keeps."""
    model = fit_pipeline_model(ds.X, ds.Y, n_lv)
    try:
        kept = apply_selection(SelectionSpec("vip", threshold=threshold), None, model)
    except EmptySelectionError:
        return 0
    return int(np.intersect1d(kept, informative).size)


def _figure6(seed: int, out: Path, threads: int) -> FigureResult:
    ds, informative = gen_fig6(RngStream(seed))
    reports = [double_cv(ds, spec, threads) for spec in fig6_pipelines(seed)]
    by_name = {r.pipeline_name: r for r in reports}
    sr_vs_vip = compare_models(by_name["SR-PLS"], by_name["VIP-PLS"])
    comparisons = [compare_models(a, b) for i, a in enumerate(reports) for b in reports[i + 1:]]
    dense = by_name["PLS"]
    dense.attach_null(permutation_null(ds, fig6_pipelines(seed)[0], FIG6_PERMUTATIONS, "Y", threads, report=dense))

    paths = [boxplot_data(reports, "boxplot_fig6").write(out), comparison_table(comparisons).write(out),
             null_histogram_data(dense).write(out)]
    paths.extend(cv_curve_data(r).write(out) for r in reports)
    vip_lvs = [c["n_lv"] for rep in by_name["VIP-PLS"].per_repetition for c in rep.chosen if c["n_lv"] > 0]
    modal_lv = int(np.bincount(vip_lvs).argmax()) if vip_lvs else 1
    summary = {
        "informative": informative.tolist(),
        "pipelines": {r.pipeline_name: {"median": r.summary["median"], "iqr": r.summary["iqr"],
                                        "mean": r.summary["mean"], "sd": r.summary["sd"]} for r in reports},
        "sr_vs_vip_p_value": sr_vs_vip.p_value,
        "dense_p_value_vs_null": dense.p_value_vs_null,
        "vip_overlap_with_truth": vip_overlap(ds, informative, modal_lv),
    }
    timings = {r.pipeline_name: r.total_seconds for r in reports}
    (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
    return FigureResult(6, summary, paths)


_FIGURES = {1: _figure1, 2: _figure2, 3: _figure3, 4: _figure4, 5: _figure5, 6: _figure6}


def reproduce_figure(figure_id: int, seed: int, out_dir, threads: int = 1) -> FigureResult:
    """Run one figure's simulation and write its CSVs and summary.json into out_dir."""
    if figure_id not in _FIGURES:
        raise ConfigError(f"figure id must be one of {FIGURE_IDS}, got {figure_id}", "figure")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    console.status(f"🖼️  figure {figure_id} (seed {seed})")
    result = _FIGURES[figure_id](seed, out, threads)
    summary = {"figure": figure_id, "seed": seed, **result.summary}
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    result.summary = summary
    result.paths.append(path)
    console.success(f"✅ figure {figure_id}: {len(result.paths)} files in {out}")
    return result
