import numpy as np
import pytest

from valguard.errors import ConfigError, DataError, DegenerateError
from valguard.metrics import (
    ConfusionCounts,
    MetricSpec,
    auroc_pairwise,
    classification_counts,
    f1,
    is_better,
    kappa,
    mcc,
    nmc,
    precision,
    recall,
    regression_metric,
    roc_curve,
    score_predictions,
    wmc,
)


@pytest.mark.parametrize("name,higher", [("q2", True), ("press", False), ("nmc", False), ("auroc", True),
                                         ("wmc", False), ("kappa", True)])
def test_orientation_is_fixed_per_metric(name, higher):
    spec = MetricSpec.from_name(name)
    assert spec.higher_better is higher
    assert is_better(spec, 1.0, 0.0) is higher


def test_wrong_orientation_is_a_config_error():
    with pytest.raises(ConfigError, match="metric.orientation"):
        MetricSpec("q2", orientation="lower_better")


def test_wmc_default_weights():
    assert MetricSpec.from_name("wmc").params == {"w_fp": 1.0, "w_fn": 100.0}
    with pytest.raises(ConfigError):
        MetricSpec.from_name("q2", w_fp=2.0)


def test_regression_metrics():
    y = np.array([[1.0], [2.0], [3.0], [4.0]])
    pred = np.array([[1.5], [2.0], [2.5], [4.0]])
    assert regression_metric(MetricSpec("press"), y, pred) == pytest.approx(0.5)
    assert regression_metric(MetricSpec("mse"), y, pred) == pytest.approx(0.125)
    assert regression_metric(MetricSpec("mae"), y, pred) == pytest.approx(0.25)
    assert regression_metric(MetricSpec("q2"), y, y, baseline_mean=2.5) == 1.0
    assert regression_metric(MetricSpec("q2"), y, np.full_like(y, 2.5), baseline_mean=2.5) == 0.0
    assert regression_metric(MetricSpec("q2"), y, pred, baseline_mean=2.5) == pytest.approx(1 - 0.5 / 5.0)


def test_q2_with_constant_y_is_degenerate():
    y = np.ones((4, 1))
    with pytest.raises(DegenerateError):
        regression_metric(MetricSpec("q2"), y, y, baseline_mean=1.0)


def test_q2_accepts_per_row_baselines():
    y = np.array([[0.0], [2.0]])
    baseline = np.array([[1.0], [0.0]])
    assert regression_metric(MetricSpec("q2"), y, y * 0.5, baseline) == pytest.approx(1 - 1.0 / 5.0)


def test_confusion_counts_and_derived_metrics():
    truth = np.array([1, 1, 1, 0, 0, 0, 0, 0])
    pred = np.array([1, 1, 0, 1, 0, 0, 0, 0])
    c = classification_counts(truth, pred, 1)
    assert (c.TP, c.FP, c.TN, c.FN) == (2, 1, 4, 1)
    assert nmc(c) == 2
    assert wmc(c, 1.0, 100.0) == 101.0
    assert precision(c) == pytest.approx(2 / 3)
    assert recall(c) == pytest.approx(2 / 3)
    assert f1(c) == pytest.approx(2 / 3)
    assert mcc(c) == pytest.approx((2 * 4 - 1 * 1) / np.sqrt(3 * 3 * 5 * 5))


def test_perfect_classifier_scores():
    c = ConfusionCounts(TP=5, FP=0, TN=5, FN=0)
    assert mcc(c) == 1.0
    assert kappa(c) == 1.0


def test_zero_denominators_fall_back_and_flag():
    truth = np.array([0.0, 0.0, 1.0])
    never_positive = np.zeros(3)
    value, flags = score_predictions(MetricSpec("precision", positive_class=1.0), truth, never_positive)
    assert value == 0.0
    assert flags == ["precision: no positive predictions"]
    value, flags = score_predictions(MetricSpec("mcc", positive_class=1.0), truth, never_positive)
    assert value == 0.0 and flags


def test_unseen_predicted_label_is_a_data_error():
    with pytest.raises(DataError):
        classification_counts([0, 1, 0], [0, 2, 0], 1)


def test_nmc_counts_every_mismatch_for_multiclass():
    value, _ = score_predictions(MetricSpec("nmc"), [0, 1, 2, 2], [0, 2, 2, 1])
    assert value == 2


def test_binary_metric_needs_positive_class():
    with pytest.raises(ConfigError):
        score_predictions(MetricSpec("recall"), [0, 1], [0, 1])


def test_auroc_needs_scores():
    with pytest.raises(ConfigError):
        score_predictions(MetricSpec("auroc", positive_class=1), [0, 1], [0, 1])


def test_roc_curve_extremes():
    labels = np.array([0, 0, 1, 1])
    assert roc_curve([0.1, 0.2, 0.8, 0.9], labels, 1).auroc == 1.0
    assert roc_curve([0.9, 0.8, 0.2, 0.1], labels, 1).auroc == 0.0
    flat = roc_curve([0.5, 0.5, 0.5, 0.5], labels, 1)
    assert flat.auroc == pytest.approx(0.5)
    assert flat.points == [(0.0, 0.0), (1.0, 1.0)]


def test_roc_curve_starts_at_origin_and_ends_at_one():
    curve = roc_curve([0.3, 0.6, 0.6, 0.9, 0.1], [0, 1, 0, 1, 0], 1)
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)


def test_auroc_equals_pairwise_statistic():
    gen = np.random.default_rng(11)
    for _ in range(100):
        n = int(gen.integers(5, 60))
        labels = (gen.random(n) < 0.4).astype(int)
        labels[:2] = [0, 1]
        # rounding creates ties between classes
        scores = np.round(gen.standard_normal(n) + labels, 1)
        assert roc_curve(scores, labels, 1).auroc == pytest.approx(auroc_pairwise(scores, labels, 1), abs=1e-12)


def test_roc_needs_both_classes():
    with pytest.raises(DegenerateError):
        roc_curve([0.1, 0.2], [1, 1], 1)


def test_roc_csv(tmp_path):
    path = roc_curve([0.1, 0.9], [0, 1], 1).to_csv(tmp_path / "roc.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "fpr,tpr"


def test_auroc_ignores_strictly_monotone_transforms():
    gen = np.random.default_rng(12)
    labels = np.repeat([0, 1], [30, 10])
    scores = gen.standard_normal(40) + labels
    base = roc_curve(scores, labels, 1).auroc
    for transform in (np.exp, lambda s: 3.0 * s - 7.0, lambda s: 1.0 / (1.0 + np.exp(-s))):
        assert roc_curve(transform(scores), labels, 1).auroc == pytest.approx(base, abs=1e-12)


@pytest.mark.parametrize("tn", [0, 1, 50, 10_000])
def test_f1_ignores_true_negatives(tn):
    assert f1(ConfusionCounts(TP=6, FP=3, TN=tn, FN=2)) == pytest.approx(12 / 17)
