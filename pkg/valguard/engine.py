"""
# Engine - double cross-validation with every learnable step inside the loop
# Inner loop picks meta-parameters on build rows only; outer loop measures generalization
# Baselines, permutation nulls, bootstrap summaries and paired comparisons live here too
"""

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import wilcoxon

from valguard import console, settings
from valguard.core import Dataset, RngStream
from valguard.dataprep import (
    VARIABLE_WISE,
    PreprocSpec,
    SplitPolicy,
    apply_chain,
    fit_chain,
    make_split,
)
from valguard.errors import ConfigError, DataError, DegenerateError, EmptySelectionError, PairingError, SplitError
from valguard.metrics import MetricSpec, is_better, score_predictions
from valguard.plsfamily import (
    PlsModel,
    SelectionSpec,
    apply_selection,
    class_scores,
    fit_pls,
    fit_plsda,
    fit_sparse_pls,
    predict,
    predict_class,
    sr_scores,
    truncate,
)
from valguard.reporting import ComparisonResult, RepetitionResult, ValidationReport

MODEL_KINDS = ("pls", "plsda", "sparse_pls", "sparse_plsda")
SELECTION_RULES = ("best", "one_se")
ADDITIVE_METRICS = ("press", "nmc", "wmc")


@dataclass(frozen=True)
class PipelineSpec:
    name: str = "pls"
    model: str = "pls"
    x_preproc: tuple[PreprocSpec, ...] = (PreprocSpec("mean_center"),)
    y_preproc: tuple[PreprocSpec, ...] = (PreprocSpec("mean_center"),)
    selection_grid: tuple[SelectionSpec, ...] = (SelectionSpec(),)
    n_lv_grid: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    inner_policy: SplitPolicy = SplitPolicy()
    outer_policy: SplitPolicy = SplitPolicy()
    metric: MetricSpec | None = None
    n_repetitions: int = 1
    seed: int = 0
    leaky: bool = False
    disclosure: str = settings.DEFAULT_DISCLOSURE
    selection_rule: str = "best"

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model '{self.model}'", "pipeline.model")
        if self.selection_rule not in SELECTION_RULES:
            raise ConfigError(f"selection_rule must be best or one_se, got '{self.selection_rule}'",
                              "pipeline.selection_rule")
        if self.n_repetitions < 1:
            raise ConfigError("n_repetitions must be at least 1", "pipeline.n_repetitions")
        if any(a < 0 for a in self.n_lv_grid):
            raise ConfigError("n_lv_grid entries must be non-negative", "pipeline.n_lv_grid")
        # the 0-LV model is always a candidate
        object.__setattr__(self, "n_lv_grid", tuple(sorted(set(self.n_lv_grid) | {0})))
        if not self.selection_grid:
            raise ConfigError("selection_grid is empty", "pipeline.selection_grid")
        sparse = self.model.startswith("sparse")
        for sel in self.selection_grid:
            if sparse != (sel.method == "sparse"):
                raise ConfigError(
                    f"selection '{sel.method}' does not fit model '{self.model}'", "pipeline.selection_grid"
                )
        if not self.is_classifier:
            kinds = [s.kind for s in self.y_preproc]
            if any(k not in VARIABLE_WISE for k in kinds) or not {"mean_center", "autoscale"} & set(kinds):
                raise ConfigError("Y preprocessing must center (mean_center or autoscale)", "pipeline.y_preproc")
        metric = self.metric or MetricSpec.from_name("nmc" if self.is_classifier else "q2")
        if metric.is_regression == self.is_classifier:
            raise ConfigError(f"metric {metric.name} does not fit model '{self.model}'", "pipeline.metric")
        object.__setattr__(self, "metric", metric)

    @property
    def is_classifier(self) -> bool:
        return self.model.endswith("plsda")

    @property
    def grid(self) -> list["GridPoint"]:
        # the mean-only model is the same whatever the selection setting
        return [GridPoint(0, SelectionSpec())] + [
            GridPoint(a, sel) for a in self.n_lv_grid if a > 0 for sel in self.selection_grid
        ]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model,
            "x_preproc": [s.to_dict() for s in self.x_preproc],
            "y_preproc": [s.to_dict() for s in self.y_preproc],
            "selection_grid": [s.to_dict() for s in self.selection_grid],
            "n_lv_grid": list(self.n_lv_grid),
            "inner_policy": self.inner_policy.to_dict(),
            "outer_policy": self.outer_policy.to_dict(),
            "metric": self.metric.to_dict(),
            "n_repetitions": self.n_repetitions,
            "seed": self.seed,
            "leaky": self.leaky,
            "disclosure": self.disclosure,
            "selection_rule": self.selection_rule,
        }


@dataclass(frozen=True)
class GridPoint:
    n_lv: int
    selection: SelectionSpec

    @property
    def key(self) -> tuple[int, str]:
        return (self.n_lv, self.selection.label if self.n_lv else "none")


@dataclass
class Candidate:
    point: GridPoint
    model: PlsModel
    selected: np.ndarray
    fallback: bool = False


@dataclass
class InnerSelection:
    chosen: GridPoint
    value: float | None
    n_selected: float
    curve: dict[int, float]
    table: list[dict]
    flags: list[str] = field(default_factory=list)
    fallbacks: int = 0


@dataclass
class PermutationResult:
    observed: float
    null_distribution: list[float]
    p_value: float
    block: str


@dataclass(frozen=True)
class BootstrapSummary:
    mean: float
    sd: float
    low: float
    high: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "interval": [self.low, self.high]}


# Model fitting on one training view
def _grid_models(train: Dataset, spec: PipelineSpec, points: Sequence[GridPoint],
                 fixed_vars: dict | None = None, cap_lv: bool = False) -> tuple[list[Candidate], list[str]]:
    """Fit every grid point on the training rows; preprocessing and selection see nothing else.

    Points the training rows cannot carry are dropped with a flag, or with cap_lv refitted at the
    largest feasible LV count.
    """
    x_chain = fit_chain(spec.x_preproc, train.X)
    Xp = apply_chain(x_chain, train.X)
    Y = train.require_y()
    if spec.is_classifier:
        targets, y_chain = Y[:, 0], ()
    else:
        y_chain = fit_chain(spec.y_preproc, Y)
        targets = apply_chain(y_chain, Y)
    n, p = Xp.shape
    all_vars = np.arange(p)

    def fit(variables: np.ndarray, n_lv: int, keep_k: int | None) -> PlsModel:
        Xm = Xp[:, variables]
        common = {"x_preproc": x_chain, "variables": variables, "n_raw_vars": p}
        if spec.is_classifier:
            return fit_plsda(Xm, targets, n_lv, keep_k=keep_k, **common)
        if keep_k is not None:
            return fit_sparse_pls(Xm, targets, n_lv, keep_k, y_preproc=y_chain, **common)
        return fit_pls(Xm, targets, n_lv, y_preproc=y_chain, **common)

    candidates: list[Candidate] = []
    flags: list[str] = []
    zero_points = [pt for pt in points if pt.n_lv == 0]
    if zero_points:
        zero = fit(all_vars, 0, None)
        candidates.extend(Candidate(pt, zero, all_vars) for pt in zero_points)

    dense_full: dict[str, PlsModel] = {}

    def dense(top: int) -> PlsModel:
        if "model" not in dense_full or dense_full["model"].n_lv < top:
            dense_full["model"] = fit(all_vars, top, None)
        return truncate(dense_full["model"], top)

    by_selection: dict[str, list[GridPoint]] = {}
    for pt in points:
        if pt.n_lv:
            by_selection.setdefault(pt.selection.label, []).append(pt)
    for pts in by_selection.values():
        sel = pts[0].selection
        lvs = sorted(pt.n_lv for pt in pts)
        top = min(lvs[-1], n - 1, p)
        full = fit(all_vars, top, min(sel.keep_k, p)) if sel.method == "sparse" and top else None
        for pt in pts:
            a = pt.n_lv
            if a > top:
                if not cap_lv or top < 1:
                    flags.append(f"{pt.key}: {a} LVs exceed {top} available")
                    continue
                flags.append(f"{pt.key}: refit capped at {top} LVs")
                a = top
            if sel.method == "sparse":
                m = truncate(full, a)
                candidates.append(Candidate(_capped(pt, a), m, all_vars[np.any(m.W != 0, axis=1)]))
                continue
            if sel.method == "none":
                candidates.append(Candidate(_capped(pt, a), dense(a), all_vars))
                continue
            fallback = False
            if fixed_vars is not None:
                variables, fallback = fixed_vars.get(pt.key, (all_vars, False))
            else:
                try:
                    variables = apply_selection(sel, Xp, dense(a))
                except EmptySelectionError:
                    variables, fallback = all_vars, True
                if sel.method == "sr":
                    n_inf = int(np.isinf(sr_scores(dense(a), Xp)).sum())
                    if n_inf:
                        flags.append(f"{pt.key}: selectivity ratio +inf (zero residual) for {n_inf} variable(s)")
            carried = min(n - 1, variables.size)
            if a > carried:
                if not cap_lv:
                    flags.append(f"{pt.key}: {variables.size} selected variables cannot carry {a} LVs")
                    continue
                flags.append(f"{pt.key}: {variables.size} selected variables; refit capped at {carried} LVs")
                a = carried
            candidates.append(Candidate(_capped(pt, a), fit(variables, a, None), variables, fallback))
    return candidates, flags


def _capped(pt: GridPoint, n_lv: int) -> GridPoint:
    return pt if n_lv == pt.n_lv else GridPoint(n_lv, pt.selection)


def _predict_rows(spec: PipelineSpec, model: PlsModel, X: np.ndarray):
    """(predictions, ranking scores or None) for raw rows."""
    if not spec.is_classifier:
        return predict(model, X), None
    labels = predict_class(model, X)
    scores = None
    if spec.metric.name == "auroc":
        scores = class_scores(model, X, spec.metric.positive_class)
    return labels, scores


def _score(spec: PipelineSpec, y_true, y_pred, baseline, scores) -> tuple[float, list[str]]:
    if spec.is_classifier:
        return score_predictions(spec.metric, np.asarray(y_true)[:, 0], y_pred, scores=scores)
    return score_predictions(spec.metric, y_true, y_pred, baseline=baseline)


def _ranking(spec: PipelineSpec, value: float, point: GridPoint, n_selected: float) -> tuple:
    oriented = -value if spec.metric.higher_better else value
    # parsimony decides between values equal to 12 significant digits
    return (float(f"{oriented:.12g}"), point.n_lv, n_selected)


def _with_default_positive(spec: PipelineSpec, ds: Dataset) -> PipelineSpec:
    metric = spec.metric
    if not spec.is_classifier or metric.positive_class is not None or metric.name == "nmc":
        return spec
    positive = float(np.max(ds.require_y()[:, 0]))
    return replace(spec, metric=replace(metric, positive_class=positive))


def _fold_values(spec: PipelineSpec, Y: np.ndarray, used_rows: list[np.ndarray], slot: dict) -> list[float]:
    """Metric per inner validation fold; folds where it is undefined are left out."""
    values = []
    for val_idx, pred, baseline, scores in zip(used_rows, slot["pred"], slot["baseline"], slot["scores"]):
        try:
            values.append(_score(spec, Y[val_idx], pred, baseline, scores)[0])
        except (DegenerateError, DataError, ConfigError):
            continue
    return values


def one_se_choice(spec: PipelineSpec, table: list[dict], best: dict) -> tuple[dict, str | None]:
    """Most parsimonious row within one standard error of the best pooled value.

    The standard error comes from the best row's per-fold values; count metrics (press, nmc, wmc)
    pool as sums, the others as means.
    """
    folds = best.get("fold_values") or []
    if len(folds) < 2:
        return best, f"one_se rule needs 2 defined inner folds, got {len(folds)}; kept the best point"
    k = len(folds)
    se = float(np.std(folds, ddof=1)) / np.sqrt(k)
    if spec.metric.name in ADDITIVE_METRICS:
        se *= k
    limit = _ranking(spec, best["value"], best["point"], best["n_selected"])[0] + se
    eligible = [r for r in table if _ranking(spec, r["value"], r["point"], r["n_selected"])[0] <= limit]
    chosen = min(eligible, key=lambda r: (r["point"].n_lv, r["n_selected"],
                                          _ranking(spec, r["value"], r["point"], r["n_selected"])[0]))
    return chosen, None


def inner_cv_select(build: Dataset, spec: PipelineSpec, rng: RngStream,
                    fixed_vars: dict | None = None) -> InnerSelection:
    """Single CV over the grid on build rows; returns the chosen point and its CV curve."""
    n = build.n_rows
    k = spec.inner_policy.resolve_folds(n, outer=False)
    if k < n and n < 2 * k:
        raise SplitError(f"{n} build rows cannot support {k} inner folds")
    if n < 3:
        raise SplitError(f"{n} build rows are too few for an inner loop")
    plan = make_split(spec.inner_policy, build, rng, outer=False)
    points = spec.grid
    Y = build.require_y()
    pooled: dict[tuple, dict] = {}
    flags: list[str] = []
    fallbacks = 0
    used_rows: list[np.ndarray] = []
    for f, (train_idx, val_idx) in enumerate(plan.folds()):
        train = build.take(train_idx, "inner_train")
        try:
            candidates, fit_flags = _grid_models(train, spec, points, fixed_vars)
        except DegenerateError as e:
            flags.append(f"inner fold {f} skipped: {e}")
            continue
        flags.extend(f"inner fold {f}: {msg}" for msg in fit_flags)
        val = build.take(val_idx, "inner_validate")
        baseline = np.broadcast_to(train.Y.mean(axis=0), val.Y.shape)
        used_rows.append(val_idx)
        for c in candidates:
            fallbacks += c.fallback
            y_pred, scores = _predict_rows(spec, c.model, val.X)
            slot = pooled.setdefault(c.point.key, {"point": c.point, "folds": [], "pred": [], "scores": [],
                                                   "baseline": [], "n_selected": []})
            slot["folds"].append(f)
            slot["pred"].append(y_pred)
            slot["scores"].append(scores)
            slot["baseline"].append(baseline)
            slot["n_selected"].append(c.selected.size)
    if not used_rows:
        raise DegenerateError("every inner fold was degenerate")
    n_used = len(used_rows)
    rows = np.concatenate(used_rows)
    table = []
    for key, slot in pooled.items():
        if len(slot["folds"]) != n_used:
            flags.append(f"grid point {key} missing from {n_used - len(slot['folds'])} inner folds; dropped")
            continue
        scores = None if slot["scores"][0] is None else np.concatenate(slot["scores"])
        try:
            value, metric_flags = _score(spec, Y[rows], np.concatenate(slot["pred"]),
                                         np.concatenate(slot["baseline"]), scores)
        except DegenerateError as e:
            flags.append(f"grid point {key}: {e}")
            continue
        flags.extend(metric_flags)
        row = {"point": slot["point"], "value": value, "n_selected": float(np.mean(slot["n_selected"]))}
        if spec.selection_rule == "one_se":
            row["fold_values"] = _fold_values(spec, Y, used_rows, slot)
        table.append(row)
    if not table:
        zero = next((s["point"] for s in pooled.values() if s["point"].n_lv == 0), None)
        if not spec.is_classifier or zero is None:
            raise DegenerateError("no grid point could be evaluated in the inner loop")
        # a single class among the pooled validation rows leaves the metric undefined everywhere
        flags.append(f"{spec.metric.name} undefined on the pooled inner validation rows; fell back to the 0-LV model")
        return InnerSelection(chosen=zero, value=None, n_selected=float(build.n_vars), curve={}, table=[],
                              flags=flags, fallbacks=fallbacks)
    best = min(table, key=lambda r: _ranking(spec, r["value"], r["point"], r["n_selected"]))
    if spec.selection_rule == "one_se":
        best, rule_flag = one_se_choice(spec, table, best)
        if rule_flag:
            flags.append(rule_flag)
    curve: dict[int, float] = {}
    for row in table:
        a = row["point"].n_lv
        if a not in curve or is_better(spec.metric, row["value"], curve[a]):
            curve[a] = row["value"]
    return InnerSelection(
        chosen=best["point"],
        value=best["value"],
        n_selected=best["n_selected"],
        curve=dict(sorted(curve.items())),
        table=[{"n_lv": r["point"].n_lv, "selection": r["point"].selection.label, "value": r["value"],
                "n_selected": r["n_selected"]} for r in table],
        flags=flags,
        fallbacks=fallbacks,
    )


def _leaky_variables(ds: Dataset, spec: PipelineSpec) -> dict:
    """Variable subsets chosen on ALL rows before splitting (leakage demonstration only)."""
    everything = ds.take(np.arange(ds.n_rows), "leaky_selection")
    points = [pt for pt in spec.grid if pt.n_lv and pt.selection.method in ("vip", "sr")]
    candidates, _ = _grid_models(everything, spec, points)
    return {c.point.key: (c.selected, c.fallback) for c in candidates}


def _run_repetition(ds: Dataset, spec: PipelineSpec, r: int, rng: RngStream,
                    fixed_vars: dict | None) -> RepetitionResult:
    started = time.perf_counter()
    plan = make_split(spec.outer_policy, ds, rng.spawn(0))
    Y = ds.require_y()
    rows, preds, scores, baselines = [], [], [], []
    chosen, fold_values, flags = [], [], []
    curve: dict[int, float] = {}
    fallbacks = 0
    for f, (build_idx, test_idx) in enumerate(plan.folds()):
        build = ds.take(build_idx, "build")
        selection = inner_cv_select(build, spec, rng.spawn(1, f), fixed_vars)
        flags.extend(f"repetition {r} outer fold {f}: {msg}" for msg in selection.flags)
        fallbacks += selection.fallbacks
        if f == 0:
            curve = selection.curve
        candidates, fit_flags = _grid_models(build, spec, [selection.chosen], fixed_vars, cap_lv=True)
        flags.extend(f"repetition {r} outer fold {f}: {msg}" for msg in fit_flags)
        if not candidates:
            raise DegenerateError(f"repetition {r} outer fold {f}: chosen point cannot be refit ({fit_flags})")
        final = candidates[0]
        fallbacks += final.fallback
        test = ds.take(test_idx, "outer_test")
        y_pred, y_scores = _predict_rows(spec, final.model, test.X)
        baseline = np.broadcast_to(build.Y.mean(axis=0), test.Y.shape)
        rows.append(test_idx)
        preds.append(y_pred)
        scores.append(y_scores)
        baselines.append(baseline)
        chosen.append({"fold": f, "n_lv": final.point.n_lv, "selection": selection.chosen.key[1],
                       "n_selected": int(final.selected.size), "inner_value": selection.value,
                       "inner_n_lv": selection.chosen.n_lv})
        try:
            fold_values.append(_score(spec, Y[test_idx], y_pred, baseline, y_scores)[0])
        except (DegenerateError, ConfigError):
            fold_values.append(None)
    rows = np.concatenate(rows)
    pooled_scores = None if scores[0] is None else np.concatenate(scores)
    pooled_pred = np.concatenate(preds)
    value, metric_flags = _score(spec, Y[rows], pooled_pred, np.concatenate(baselines), pooled_scores)
    flags.extend(f"repetition {r}: {msg}" for msg in metric_flags)
    for msg in flags:
        console.warn(msg)
    return RepetitionResult(
        index=r,
        value=value,
        fold_values=fold_values,
        chosen=chosen,
        seconds=time.perf_counter() - started,
        curve=curve,
        flags=flags,
        fallbacks=fallbacks,
        predictions={
            "row_ids": ds.row_ids[rows].tolist(),
            "y_true": Y[rows].tolist(),
            "y_pred": np.asarray(pooled_pred).tolist(),
            "scores": None if pooled_scores is None else pooled_scores.tolist(),
        },
    )


def observation_losses(spec: PipelineSpec, repetitions: Sequence[RepetitionResult]) -> np.ndarray:
    """Outer-test loss per original row, averaged over repetitions, in row-id order.

    Squared error summed over Y columns for regression, 0/1 misclassification for classifiers.
    """
    frames = []
    for rep in repetitions:
        pred = rep.predictions
        y_true = np.asarray(pred["y_true"], dtype=float)
        y_pred = np.asarray(pred["y_pred"], dtype=float)
        if spec.is_classifier:
            loss = (y_true[:, 0] != y_pred).astype(float)
        else:
            loss = np.sum((y_true - y_pred) ** 2, axis=1)
        frames.append(pd.DataFrame({"row_id": pred["row_ids"], "loss": loss}))
    if not frames:
        return np.array([])
    return pd.concat(frames).groupby("row_id", sort=True)["loss"].mean().to_numpy()


def double_cv(ds: Dataset, spec: PipelineSpec, threads: int = 1, demonstrate_leakage: bool = False,
              n_boot: int = 1000) -> ValidationReport:
    """Repeated double cross-validation of one pipeline."""
    if spec.leaky and not demonstrate_leakage:
        raise ConfigError("leaky selection requires demonstrate_leakage", "pipeline.leaky")
    ds.require_y()
    spec = _with_default_positive(spec, ds)
    root = RngStream(spec.seed)
    fixed_vars = _leaky_variables(ds, spec) if spec.leaky else None
    console.status(f"🔁 double CV '{spec.name}': {spec.n_repetitions} repetition(s), {len(spec.grid)} grid points")
    repetitions = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_repetition)(ds, spec, r, root.spawn(r), fixed_vars) for r in range(spec.n_repetitions)
    )
    values = np.array([rep.value for rep in repetitions])
    for rep in repetitions:
        console.step(f"   repetition {rep.index}: {spec.metric.name} = {rep.value:.4f} ({rep.seconds:.2f}s)")

    baseline_zero = zero_lv_baseline(ds, spec)
    naive = naive_class_baseline(ds, spec) if spec.is_classifier else None
    boot = bootstrap_metric(values, n_boot, root.spawn(10**6)).to_dict() if values.size >= 2 else None
    losses = observation_losses(spec, repetitions)
    obs_boot = None
    if losses.size >= 2:
        obs_boot = bootstrap_metric(losses, n_boot, root.spawn(10**6 + 1)).to_dict()
        obs_boot["loss"] = "misclassification" if spec.is_classifier else "squared_error"
    q75, q25 = np.percentile(values, [75, 25])
    report = ValidationReport(
        pipeline_name=spec.name,
        pipeline=spec.to_dict(),
        metric=spec.metric.to_dict(),
        seed=spec.seed,
        n_repetitions=spec.n_repetitions,
        per_repetition=repetitions,
        summary={
            "mean": float(values.mean()),
            "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
            "median": float(np.median(values)),
            "iqr": float(q75 - q25),
        },
        baseline_zero_lv=baseline_zero,
        baseline_naive_class=naive,
        independence_disclosure=spec.disclosure,
        selection_fallbacks=sum(rep.fallbacks for rep in repetitions),
        flags=[msg for rep in repetitions for msg in rep.flags],
        watermark=settings.LEAKAGE_WATERMARK if spec.leaky else None,
        bootstrap=boot,
        bootstrap_observations=obs_boot,
        caveats=[settings.REPEATED_CV_CAVEAT, settings.CORRELATION_CAVEAT],
    )
    if spec.leaky:
        console.warn(f"{settings.LEAKAGE_WATERMARK}: '{spec.name}' selected variables before splitting")
    console.success(f"✅ '{spec.name}': median {spec.metric.name} = {report.summary['median']:.4f}")
    return report


# Baselines
def zero_lv_baseline(ds: Dataset, spec: PipelineSpec) -> float:
    """Cross-validated PRESS of the build-fold mean predictor (classifiers: metric of the majority rule)."""
    Y = ds.require_y()
    if np.all(Y == Y[0]):
        raise DegenerateError("0-LV baseline undefined: Y is constant")
    spec = _with_default_positive(spec, ds)
    plan = make_split(spec.outer_policy, ds, RngStream(spec.seed).spawn(0).spawn(0))
    rows, preds = [], []
    for build_idx, test_idx in plan.folds():
        build = ds.take(build_idx, "build")
        test = ds.take(test_idx, "outer_test")
        if spec.is_classifier:
            labels, counts = np.unique(build.Y[:, 0], return_counts=True)
            preds.append(np.full(test.n_rows, labels[np.argmax(counts)]))
        else:
            preds.append(np.broadcast_to(build.Y.mean(axis=0), test.Y.shape))
        rows.append(test_idx)
    rows = np.concatenate(rows)
    pred = np.concatenate(preds)
    if not spec.is_classifier:
        return float(np.sum((Y[rows] - pred) ** 2))
    scores = np.zeros(rows.size) if spec.metric.name == "auroc" else None
    return score_predictions(spec.metric, Y[rows, 0], pred, scores=scores)[0]


def naive_class_baseline(ds: Dataset, spec: PipelineSpec) -> float:
    """Metric of the rule that always answers the most frequent non-positive class."""
    spec = _with_default_positive(spec, ds)
    labels = ds.require_y()[:, 0]
    classes, counts = np.unique(labels, return_counts=True)
    negatives = classes != spec.metric.positive_class
    if spec.metric.positive_class is None or not negatives.any():
        negatives = np.ones_like(negatives)
    answer = classes[negatives][np.argmax(counts[negatives])]
    pred = np.full(labels.size, answer)
    scores = np.zeros(labels.size) if spec.metric.name == "auroc" else None
    return score_predictions(spec.metric, labels, pred, scores=scores)[0]


# Permutation testing
def permutation_pvalue(observed: float, null: Sequence[float], higher_better: bool) -> float:
    null = np.asarray(null, dtype=float)
    hits = np.sum(null >= observed) if higher_better else np.sum(null <= observed)
    return float((1 + hits) / (1 + null.size))


def _permuted(ds: Dataset, order: np.ndarray, block: str) -> Dataset:
    if block == "Y":
        return ds.with_y(ds.require_y()[order])
    if block == "X":
        return ds.with_x(ds.X[order])
    raise ConfigError(f"permute_block must be 'Y' or 'X', got '{block}'", "permutation.block")


def permutation_test(statistic: Callable[[Dataset], float], ds: Dataset, n_perm: int, block: str,
                     rng: RngStream, higher_better: bool, threads: int = 1,
                     observed: float | None = None) -> PermutationResult:
    """Monte-Carlo permutation test of any dataset statistic."""
    if n_perm < 1:
        raise ConfigError("n_perm must be at least 1", "permutation.n_perm")
    _permuted(ds, np.arange(ds.n_rows), block)
    if observed is None:
        observed = statistic(ds)

    def one(i: int) -> float:
        order = rng.spawn(i).generator().permutation(ds.n_rows)
        return statistic(_permuted(ds, order, block))

    null = Parallel(n_jobs=threads, prefer="threads")(delayed(one)(i) for i in range(n_perm))
    return PermutationResult(observed, [float(v) for v in null],
                             permutation_pvalue(observed, null, higher_better), block)


def exhaustive_permutation_pvalue(statistic: Callable[[Dataset], float], ds: Dataset, block: str,
                                  higher_better: bool) -> float:
    """Exact p-value over all row orders (tiny n only); the identity order is the observed case."""
    if ds.n_rows > 8:
        raise ConfigError(f"exhaustive enumeration of {ds.n_rows}! orders is too large", "permutation")
    observed = statistic(ds)
    null = [statistic(_permuted(ds, np.array(order), block))
            for order in itertools.permutations(range(ds.n_rows))]
    null = np.asarray(null)
    hits = np.sum(null >= observed) if higher_better else np.sum(null <= observed)
    return float(hits / null.size)


def permutation_null(ds: Dataset, spec: PipelineSpec, n_perm: int, permute_block: str = "Y",
                     threads: int = 1, demonstrate_leakage: bool = False,
                     report: ValidationReport | None = None) -> PermutationResult:
    """Null distribution of the full double CV (R=1 per permutation)."""
    if report is None:
        report = double_cv(ds, spec, threads, demonstrate_leakage)
    observed = report.summary["median"]
    single = replace(spec, n_repetitions=1)
    quiet_before = console.QUIET
    console.set_quiet(True)
    try:
        result = permutation_test(
            lambda d: double_cv(d, single, 1, demonstrate_leakage, n_boot=1).per_repetition[0].value,
            ds, n_perm, permute_block, RngStream(spec.seed).spawn(2**31), spec.metric.higher_better,
            threads, observed=observed,
        )
    finally:
        console.set_quiet(quiet_before)
    console.success(f"🎲 permutation null ({n_perm} x {permute_block}): p = {result.p_value:.4f}")
    return result


# Uncertainty and comparison
def bootstrap_metric(values, n_boot: int, rng: RngStream) -> BootstrapSummary:
    """Nonparametric bootstrap of the mean with a percentile 95% interval."""
    values = np.asarray(values, dtype=float).ravel()
    if n_boot < 1:
        raise ConfigError("n_boot must be at least 1", "bootstrap.n_boot")
    if values.size < 2:
        raise DegenerateError("bootstrap needs at least 2 observations")
    idx = rng.generator().integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return BootstrapSummary(
        mean=float(values.mean()),
        sd=float(means.std(ddof=1)) if n_boot > 1 else 0.0,
        low=float(low),
        high=float(high),
    )


def signed_rank_pvalue(diffs) -> tuple[float, str]:
    """Two-sided Wilcoxon signed-rank p-value; exact for up to 20 untied nonzero differences."""
    diffs = np.asarray(diffs, dtype=float)
    nonzero = diffs[diffs != 0]
    if nonzero.size == 0:
        return 1.0, "none"
    magnitudes = np.abs(nonzero)
    untied = np.unique(magnitudes).size == magnitudes.size
    method = "exact" if nonzero.size <= 20 and untied else "approx"
    p = wilcoxon(nonzero, alternative="two-sided", method=method).pvalue
    return float(min(1.0, p)), method


def compare_models(report_a: ValidationReport, report_b: ValidationReport) -> ComparisonResult:
    """Paired comparison of two pipelines over the same repetitions."""
    if report_a.n_repetitions != report_b.n_repetitions:
        raise PairingError(f"{report_a.n_repetitions} vs {report_b.n_repetitions} repetitions", "pipelines")
    if report_a.metric["name"] != report_b.metric["name"]:
        raise PairingError(f"metrics {report_a.metric['name']} and {report_b.metric['name']} differ", "pipelines")
    if report_a.seed != report_b.seed or report_a.pipeline["outer_policy"] != report_b.pipeline["outer_policy"]:
        raise PairingError("pipelines do not share outer splits (seed or outer policy differ)", "pipelines")
    a, b = report_a.values, report_b.values
    diffs = a - b
    p_value, method = signed_rank_pvalue(diffs)

    def iqr(v: np.ndarray) -> float:
        q75, q25 = np.percentile(v, [75, 25])
        return float(q75 - q25)

    return ComparisonResult(
        model_names=(report_a.pipeline_name, report_b.pipeline_name),
        metric=report_a.metric["name"],
        per_repetition_diffs=[float(d) for d in diffs],
        p_value=p_value,
        test_method=method,
        medians=(float(np.median(a)), float(np.median(b))),
        iqrs=(iqr(a), iqr(b)),
        timings_seconds=(report_a.total_seconds, report_b.total_seconds),
        caveats=[settings.REPEATED_CV_CAVEAT],
        watermark=report_a.watermark or report_b.watermark,
    )


def compare_all(reports: Sequence[ValidationReport]) -> list[ComparisonResult]:
    """Every pipeline pair, in config order."""
    return [compare_models(a, b) for a, b in itertools.combinations(reports, 2)]
