"""
# Metrics - performance criteria with explicit orientation
# Degenerate denominators fall back to conservative values and are flagged
# ROC curves group tied scores into diagonal segments
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from valguard import settings
from valguard.errors import ConfigError, DataError, DegenerateError, ShapeError

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

ORIENTATION = {
    "press": LOWER_BETTER,
    "q2": HIGHER_BETTER,
    "mae": LOWER_BETTER,
    "mse": LOWER_BETTER,
    "nmc": LOWER_BETTER,
    "wmc": LOWER_BETTER,
    "precision": HIGHER_BETTER,
    "recall": HIGHER_BETTER,
    "f1": HIGHER_BETTER,
    "auroc": HIGHER_BETTER,
    "mcc": HIGHER_BETTER,
    "kappa": HIGHER_BETTER,
}
# numpy 2 renamed trapz
_trapezoid = getattr(np, "trapezoid", None) or np.trapz

REGRESSION_METRICS = ("press", "q2", "mae", "mse")
CLASSIFICATION_METRICS = ("nmc", "wmc", "precision", "recall", "f1", "auroc", "mcc", "kappa")


@dataclass(frozen=True)
class MetricSpec:
    name: str
    orientation: str = ""
    params: dict = field(default_factory=dict)
    positive_class: float | None = None

    def __post_init__(self):
        if self.name not in ORIENTATION:
            raise ConfigError(f"unknown metric '{self.name}'", "metric.name")
        expected = ORIENTATION[self.name]
        if self.orientation and self.orientation != expected:
            raise ConfigError(f"{self.name} is {expected}, not {self.orientation}", "metric.orientation")
        object.__setattr__(self, "orientation", expected)
        params = dict(self.params)
        if self.name == "wmc":
            params.setdefault("w_fp", settings.WMC_WEIGHT_FP)
            params.setdefault("w_fn", settings.WMC_WEIGHT_FN)
            if params["w_fp"] < 0 or params["w_fn"] < 0:
                raise ConfigError("wmc weights must be non-negative", "metric.params")
        elif params:
            raise ConfigError(f"{self.name} takes no parameters", "metric.params")
        object.__setattr__(self, "params", params)

    @classmethod
    def from_name(cls, name: str, positive_class=None, **params) -> "MetricSpec":
        return cls(name=name, params=params, positive_class=positive_class)

    @property
    def is_regression(self) -> bool:
        return self.name in REGRESSION_METRICS

    @property
    def higher_better(self) -> bool:
        return self.orientation == HIGHER_BETTER

    def to_dict(self) -> dict:
        return {"name": self.name, "orientation": self.orientation, "params": dict(self.params),
                "positive_class": self.positive_class}


def is_better(spec: MetricSpec, a: float, b: float) -> bool:
    """True when a is strictly better than b."""
    return a > b if spec.higher_better else a < b


# Regression
def regression_metric(spec: MetricSpec, Y_true, Y_pred, baseline_mean=None) -> float:
    """press, q2, mae or mse; q2 compares against the cross-validated mean predictor.

    baseline_mean may be one value per column or a full matrix of per-row
    baseline predictions (the build-fold means the engine supplies).
    """
    Y_true = np.asarray(Y_true, dtype=float).reshape(len(Y_true), -1)
    Y_pred = np.asarray(Y_pred, dtype=float).reshape(len(Y_pred), -1)
    if Y_true.shape != Y_pred.shape:
        raise ShapeError(f"Y_true {Y_true.shape} and Y_pred {Y_pred.shape} differ")
    resid = Y_true - Y_pred
    if spec.name == "press":
        return float(np.sum(resid ** 2))
    if spec.name == "mae":
        return float(np.mean(np.abs(resid)))
    if spec.name == "mse":
        return float(np.mean(resid ** 2))
    if spec.name != "q2":
        raise ConfigError(f"{spec.name} is not a regression metric", "metric.name")
    if baseline_mean is None:
        raise ConfigError("q2 needs the baseline mean predictor", "metric.name")
    press_baseline = float(np.sum((Y_true - np.broadcast_to(baseline_mean, Y_true.shape)) ** 2))
    if press_baseline == 0:
        raise DegenerateError("q2 undefined: baseline PRESS is zero (constant Y)")
    return 1.0 - float(np.sum(resid ** 2)) / press_baseline


# Classification
@dataclass(frozen=True)
class ConfusionCounts:
    TP: int
    FP: int
    TN: int
    FN: int

    @property
    def n(self) -> int:
        return self.TP + self.FP + self.TN + self.FN


def classification_counts(labels_true, labels_pred, positive_class, known_labels=None) -> ConfusionCounts:
    """Confusion counts of positive_class versus every other label."""
    labels_true = np.asarray(labels_true).ravel()
    labels_pred = np.asarray(labels_pred).ravel()
    if labels_true.shape != labels_pred.shape:
        raise ShapeError(f"{labels_true.size} true labels, {labels_pred.size} predictions")
    known = np.unique(labels_true) if known_labels is None else np.asarray(known_labels)
    unseen = np.setdiff1d(np.unique(labels_pred), known)
    if unseen.size:
        raise DataError(f"predicted label {unseen[0]} never occurs in the true labels")
    if known_labels is None and known.size > 2:
        raise DataError(f"binary counts need at most 2 labels, got {known.size}")
    pos_true = labels_true == positive_class
    pos_pred = labels_pred == positive_class
    return ConfusionCounts(
        TP=int(np.sum(pos_true & pos_pred)),
        FP=int(np.sum(~pos_true & pos_pred)),
        TN=int(np.sum(~pos_true & ~pos_pred)),
        FN=int(np.sum(pos_true & ~pos_pred)),
    )


def nmc(c: ConfusionCounts) -> int:
    return c.FP + c.FN


def wmc(c: ConfusionCounts, w_fp: float = settings.WMC_WEIGHT_FP, w_fn: float = settings.WMC_WEIGHT_FN) -> float:
    return w_fp * c.FP + w_fn * c.FN


def precision(c: ConfusionCounts) -> float:
    denom = c.TP + c.FP
    return c.TP / denom if denom else 0.0


def recall(c: ConfusionCounts) -> float:
    denom = c.TP + c.FN
    return c.TP / denom if denom else 0.0


def f1(c: ConfusionCounts) -> float:
    denom = 2 * c.TP + c.FP + c.FN
    return 2 * c.TP / denom if denom else 0.0


def mcc(c: ConfusionCounts) -> float:
    marginals = [c.TP + c.FP, c.TP + c.FN, c.TN + c.FP, c.TN + c.FN]
    if min(marginals) == 0:
        return 0.0
    return (c.TP * c.TN - c.FP * c.FN) / float(np.sqrt(np.prod(np.array(marginals, dtype=float))))


def kappa(c: ConfusionCounts) -> float:
    n = c.n
    if n == 0:
        return 0.0
    observed = (c.TP + c.TN) / n
    expected = ((c.TP + c.FP) * (c.TP + c.FN) + (c.TN + c.FN) * (c.TN + c.FP)) / n ** 2
    if expected == 1:
        return 0.0
    return (observed - expected) / (1 - expected)


def degenerate_reason(name: str, c: ConfusionCounts) -> str | None:
    """Why a count metric fell back to its 0/0 convention, if it did."""
    if name == "precision" and c.TP + c.FP == 0:
        return "precision: no positive predictions"
    if name == "recall" and c.TP + c.FN == 0:
        return "recall: no positive rows"
    if name == "f1" and 2 * c.TP + c.FP + c.FN == 0:
        return "f1: no positive rows or predictions"
    if name == "mcc" and min(c.TP + c.FP, c.TP + c.FN, c.TN + c.FP, c.TN + c.FN) == 0:
        return "mcc: a confusion marginal is zero"
    if name == "kappa" and c.n and ((c.TP + c.FP) * (c.TP + c.FN) + (c.TN + c.FN) * (c.TN + c.FP)) == c.n ** 2:
        return "kappa: expected agreement is 1"
    return None


COUNT_METRICS = {"nmc": nmc, "precision": precision, "recall": recall, "f1": f1, "mcc": mcc, "kappa": kappa}


# ROC
@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"fpr": self.fpr, "tpr": self.tpr})

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


def _binary_truth(labels_true, positive_class) -> np.ndarray:
    is_pos = np.asarray(labels_true).ravel() == positive_class
    if is_pos.all() or not is_pos.any():
        raise DegenerateError("ROC needs at least one positive and one negative row")
    return is_pos


def roc_curve(scores, labels_true, positive_class) -> RocCurve:
    """Threshold sweep over unique scores, descending, with trapezoidal AUROC."""
    scores = np.asarray(scores, dtype=float).ravel()
    is_pos = _binary_truth(labels_true, positive_class)
    if scores.size != is_pos.size:
        raise ShapeError(f"{scores.size} scores for {is_pos.size} labels")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tps = np.cumsum(is_pos[order])
    fps = np.cumsum(~is_pos[order])
    # last index of every tie group
    ends = np.r_[np.flatnonzero(np.diff(sorted_scores) != 0), scores.size - 1]
    tpr = np.r_[0.0, tps[ends] / is_pos.sum()]
    fpr = np.r_[0.0, fps[ends] / (~is_pos).sum()]
    return RocCurve(fpr=fpr, tpr=tpr, auroc=float(_trapezoid(tpr, fpr)))


def auroc_pairwise(scores, labels_true, positive_class) -> float:
    """P(score+ > score-) + ½ P(score+ = score-) over all positive/negative pairs."""
    scores = np.asarray(scores, dtype=float).ravel()
    is_pos = _binary_truth(labels_true, positive_class)
    pos, neg = scores[is_pos], scores[~is_pos]
    greater = np.sum(pos[:, None] > neg[None, :])
    ties = np.sum(pos[:, None] == neg[None, :])
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


def score_predictions(spec: MetricSpec, y_true, y_pred, baseline=None, scores=None) -> tuple[float, list[str]]:
    """Evaluate one metric; returns (value, degenerate-case flags)."""
    if spec.is_regression:
        return regression_metric(spec, y_true, y_pred, baseline), []
    y_true = np.asarray(y_true).ravel()
    positive = spec.positive_class
    if spec.name == "auroc":
        if scores is None:
            raise ConfigError("auroc needs ranking scores", "metric.name")
        return roc_curve(scores, y_true, positive).auroc, []
    y_pred = np.asarray(y_pred).ravel()
    if spec.name == "nmc":
        return float(np.sum(y_true != y_pred)), []
    if positive is None:
        raise ConfigError(f"{spec.name} needs a positive_class", "metric.positive_class")
    counts = classification_counts(y_true, y_pred, positive, known_labels=np.union1d(y_true, y_pred))
    if spec.name == "wmc":
        return wmc(counts, spec.params["w_fp"], spec.params["w_fn"]), []
    reason = degenerate_reason(spec.name, counts)
    return float(COUNT_METRICS[spec.name](counts)), [reason] if reason else []
