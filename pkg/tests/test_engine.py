import json

import numpy as np
import pytest

from valguard import settings
from valguard.core import Dataset, RngStream, row_access_audit
from valguard.dataprep import PreprocSpec, SplitPolicy
from valguard.engine import (
    GridPoint,
    PipelineSpec,
    _grid_models,
    _ranking,
    bootstrap_metric,
    compare_all,
    compare_models,
    double_cv,
    exhaustive_permutation_pvalue,
    inner_cv_select,
    naive_class_baseline,
    observation_losses,
    one_se_choice,
    permutation_null,
    permutation_pvalue,
    permutation_test,
    signed_rank_pvalue,
    zero_lv_baseline,
)
from valguard.errors import ConfigError, DegenerateError, PairingError, SplitError
from valguard.metrics import MetricSpec
from valguard.plsfamily import SelectionSpec
from valguard.reporting import ValidationReport
from valguard.simgen import gen_fig4

FAST = {"outer_policy": SplitPolicy(n_folds=5), "inner_policy": SplitPolicy(n_folds=5)}


def small_spec(**kwargs) -> PipelineSpec:
    params = {"n_lv_grid": (0, 1, 2, 3), **FAST}
    params.update(kwargs)
    return PipelineSpec(**params)


# Pipeline specification
def test_zero_lv_is_always_on_the_grid():
    spec = PipelineSpec(n_lv_grid=(3, 1))
    assert spec.n_lv_grid == (0, 1, 3)


def test_grid_has_a_single_mean_model():
    spec = PipelineSpec(selection_grid=(SelectionSpec("vip", 1.0), SelectionSpec("vip", 1.5)), n_lv_grid=(1, 2))
    keys = [pt.key for pt in spec.grid]
    assert keys[0] == (0, "none")
    assert len(keys) == 5 and len(set(keys)) == 5


def test_default_metrics():
    assert PipelineSpec().metric.name == "q2"
    assert PipelineSpec(model="plsda").metric.name == "nmc"


@pytest.mark.parametrize("kwargs", [
    {"model": "lda"},
    {"model": "sparse_pls"},
    {"selection_grid": (SelectionSpec("sparse", keep_k=3),)},
    {"selection_grid": ()},
    {"y_preproc": ()},
    {"y_preproc": (PreprocSpec("row_normalize"),)},
    {"metric": MetricSpec.from_name("nmc")},
    {"model": "plsda", "metric": MetricSpec.from_name("q2")},
    {"n_lv_grid": (-1, 2)},
    {"n_repetitions": 0},
])
def test_invalid_pipeline_specs(kwargs):
    with pytest.raises(ConfigError):
        PipelineSpec(**kwargs)


def test_ties_prefer_fewer_components_then_fewer_variables():
    spec = PipelineSpec()
    none = SelectionSpec()
    simple = _ranking(spec, 0.5, GridPoint(2, none), 5)
    complex_ = _ranking(spec, 0.5 + 1e-15, GridPoint(3, none), 5)
    assert simple < complex_
    assert _ranking(spec, 0.5, GridPoint(2, none), 3) < simple
    # a clearly better value wins regardless of complexity
    assert _ranking(spec, 0.6, GridPoint(5, none), 5) < simple


# Inner loop
def test_inner_selection_finds_the_linear_structure(linear_dataset, rng):
    sel = inner_cv_select(linear_dataset, PipelineSpec(), rng)
    assert sel.chosen.n_lv >= 3
    assert sel.value > 0.99
    assert sorted(sel.curve) == [0, 1, 2, 3, 4, 5]
    assert sel.curve[0] < 0.1
    assert len(sel.table) == 6


def test_inner_loop_needs_enough_build_rows(linear_dataset, rng):
    build = linear_dataset.take(range(4), "build")
    with pytest.raises(SplitError):
        inner_cv_select(build, PipelineSpec(inner_policy=SplitPolicy(n_folds=3)), rng)


def test_inner_loop_with_constant_y_is_degenerate(rng):
    ds = Dataset(X=np.random.default_rng(0).standard_normal((12, 3)), Y=np.ones((12, 1)))
    with pytest.raises(DegenerateError):
        inner_cv_select(ds, PipelineSpec(n_lv_grid=(0, 1), inner_policy=SplitPolicy(n_folds=3)), rng)


# Double cross-validation
def test_double_cv_report(linear_dataset):
    report = double_cv(linear_dataset, small_spec(n_repetitions=2, seed=1))
    assert report.n_repetitions == 2 and len(report.per_repetition) == 2
    assert report.summary["median"] > 0.9
    assert report.baseline_zero_lv > 0
    assert report.baseline_naive_class is None
    assert report.bootstrap is not None
    assert report.watermark is None
    assert report.caveats
    for rep in report.per_repetition:
        assert sorted(rep.predictions["row_ids"]) == list(range(30))
        assert len(rep.chosen) == 5
        assert all(c["n_lv"] >= 1 for c in rep.chosen)


def test_double_cv_is_deterministic(linear_dataset):
    spec = small_spec(n_repetitions=3, seed=9)
    first = double_cv(linear_dataset, spec).to_json()
    assert double_cv(linear_dataset, spec).to_json() == first
    assert double_cv(linear_dataset, spec, threads=3).to_json() == first
    assert double_cv(linear_dataset, small_spec(n_repetitions=3, seed=10)).to_json() != first


def test_report_json_omits_timings_and_round_trips(linear_dataset):
    report = double_cv(linear_dataset, small_spec(n_repetitions=2))
    data = json.loads(report.to_json())
    assert all(rep["seconds"] is None for rep in data["per_repetition"])
    back = ValidationReport.from_dict(data)
    assert np.array_equal(back.values, report.values)
    assert back.cv_curves == report.cv_curves


def test_test_rows_never_reach_fitting(linear_dataset):
    spec = small_spec(selection_grid=(SelectionSpec("vip", 1.0), SelectionSpec("sr", 1.0)),
                      x_preproc=(PreprocSpec("autoscale"),), n_repetitions=2)
    with row_access_audit() as log:
        double_cv(linear_dataset, spec)
    tests = [i for i, rec in enumerate(log) if rec.purpose == "outer_test"]
    assert len(tests) == 2 * 5 + 5  # repetitions plus the 0-LV baseline
    assert "leaky_selection" not in {rec.purpose for rec in log}
    start = 0
    for i in tests:
        held_out = set(log[i].row_ids)
        for rec in log[start:i]:
            assert not held_out & set(rec.row_ids), rec.purpose
        start = i + 1


def test_leaky_selection_is_refused_without_demonstration(linear_dataset):
    spec = small_spec(selection_grid=(SelectionSpec("vip", 1.0),), leaky=True)
    with pytest.raises(ConfigError, match="leaky"):
        double_cv(linear_dataset, spec)


def test_leaky_demonstration_is_watermarked(linear_dataset):
    spec = small_spec(selection_grid=(SelectionSpec("vip", 1.0),), leaky=True)
    with row_access_audit() as log:
        report = double_cv(linear_dataset, spec, demonstrate_leakage=True)
    assert log[0].purpose == "leaky_selection"
    assert set(log[0].row_ids) == set(range(30))
    assert report.watermark == settings.LEAKAGE_WATERMARK
    assert report.pipeline["leaky"] is True


def test_plsda_double_cv(class_dataset):
    spec = PipelineSpec(model="plsda", n_lv_grid=(0, 1, 2), **FAST)
    report = double_cv(class_dataset, spec)
    assert report.metric["name"] == "nmc"
    assert report.summary["median"] <= 2
    assert report.baseline_naive_class == 20


def test_auroc_gets_a_default_positive_class(class_dataset):
    spec = PipelineSpec(model="plsda", n_lv_grid=(0, 1), metric=MetricSpec.from_name("auroc"), **FAST)
    report = double_cv(class_dataset, spec)
    assert report.metric["positive_class"] == 1.0
    assert report.summary["median"] > 0.95
    assert report.baseline_zero_lv == pytest.approx(0.5)


def test_sparse_pls_double_cv(linear_dataset):
    spec = small_spec(model="sparse_pls", selection_grid=(SelectionSpec("sparse", keep_k=2),
                                                          SelectionSpec("sparse", keep_k=4)))
    report = double_cv(linear_dataset, spec)
    chosen = [c["selection"] for c in report.per_repetition[0].chosen]
    assert set(chosen) <= {"sparse k=2", "sparse k=4", "none"}


# Baselines
def test_zero_lv_baseline_loo_closed_form(linear_dataset):
    n = linear_dataset.n_rows
    spec = PipelineSpec(outer_policy=SplitPolicy(n_folds=n))
    y = linear_dataset.Y[:, 0]
    expected = (n / (n - 1)) ** 2 * np.sum((y - y.mean()) ** 2)
    assert zero_lv_baseline(linear_dataset, spec) == pytest.approx(expected)


def test_zero_lv_baseline_needs_varying_y():
    ds = Dataset(X=np.ones((6, 2)), Y=np.full((6, 1), 2.0))
    with pytest.raises(DegenerateError):
        zero_lv_baseline(ds, PipelineSpec(outer_policy=SplitPolicy(n_folds=3)))


def test_naive_class_baseline():
    labels = np.repeat([0.0, 1.0], [15, 5])
    ds = Dataset(X=np.zeros((20, 1)), Y=labels)
    assert naive_class_baseline(ds, PipelineSpec(model="plsda")) == 5
    recall = PipelineSpec(model="plsda", metric=MetricSpec.from_name("recall"))
    assert naive_class_baseline(ds, recall) == 0.0


# Permutation testing
def test_permutation_pvalue_counts_the_observed_case():
    null = np.linspace(0.0, 0.5, 19)
    assert permutation_pvalue(1.0, null, higher_better=True) == pytest.approx(0.05)
    assert permutation_pvalue(0.0, null, higher_better=True) == 1.0
    assert permutation_pvalue(-1.0, null, higher_better=False) == pytest.approx(0.05)


def _association(ds: Dataset) -> float:
    return float(ds.X[:, 0] @ ds.Y[:, 0])


def test_permutation_test_detects_association(linear_dataset, rng):
    ds = linear_dataset.with_x(linear_dataset.Y)
    result = permutation_test(_association, ds, 99, "Y", rng, higher_better=True)
    assert result.p_value == pytest.approx(0.01)
    assert len(result.null_distribution) == 99
    again = permutation_test(_association, ds, 99, "Y", rng, higher_better=True, threads=2)
    assert again.null_distribution == result.null_distribution


def test_permutation_block_is_validated(linear_dataset, rng):
    with pytest.raises(ConfigError):
        permutation_test(_association, linear_dataset, 5, "Z", rng, higher_better=True)
    with pytest.raises(ConfigError):
        permutation_test(_association, linear_dataset, 0, "Y", rng, higher_better=True)


def test_monte_carlo_approaches_exhaustive_enumeration(rng):
    ds = Dataset(X=np.array([[1.0], [2.0], [3.0], [4.0]]), Y=np.array([1.0, 2.0, 4.0, 3.0]))
    exact = exhaustive_permutation_pvalue(_association, ds, "Y", higher_better=True)
    assert exact == pytest.approx(4 / 24)
    mc = permutation_test(_association, ds, 6000, "Y", rng, higher_better=True)
    assert mc.p_value == pytest.approx(exact, abs=0.02)


def test_exhaustive_enumeration_is_limited():
    ds = Dataset(X=np.zeros((9, 1)), Y=np.arange(9.0))
    with pytest.raises(ConfigError):
        exhaustive_permutation_pvalue(_association, ds, "Y", higher_better=True)


def test_permutation_null_of_double_cv(linear_dataset):
    spec = small_spec(n_lv_grid=(0, 1, 2))
    report = double_cv(linear_dataset, spec)
    result = permutation_null(linear_dataset, spec, 4, report=report)
    assert result.observed == report.summary["median"]
    assert result.p_value == pytest.approx(0.2)
    report.attach_null(result)
    assert report.p_value_vs_null == pytest.approx(0.2)
    assert report.permute_block == "Y"


# Uncertainty and comparison
def test_bootstrap_interval(rng):
    summary = bootstrap_metric([1.0, 2.0, 3.0, 4.0, 5.0], 2000, rng)
    assert summary.mean == 3.0
    assert summary.low < 3.0 < summary.high
    assert summary == bootstrap_metric([1.0, 2.0, 3.0, 4.0, 5.0], 2000, rng)
    flat = bootstrap_metric([2.0, 2.0, 2.0], 100, rng)
    assert flat.low == flat.high == 2.0 and flat.sd == 0.0


def test_bootstrap_errors(rng):
    with pytest.raises(ConfigError):
        bootstrap_metric([1.0, 2.0], 0, rng)
    with pytest.raises(DegenerateError):
        bootstrap_metric([1.0], 100, rng)


def test_signed_rank_pvalue():
    p, method = signed_rank_pvalue(np.arange(1.0, 11.0))
    assert method == "exact"
    assert p == pytest.approx(2 / 1024)
    assert signed_rank_pvalue(np.zeros(5)) == (1.0, "none")
    assert signed_rank_pvalue([1.0, -1.0, 2.0, 3.0])[1] == "approx"


def test_compare_models_pairs_repetitions(make_report):
    a = make_report([0.5 + 0.03 * i for i in range(10)], name="a")
    b = make_report([0.1 + 0.01 * i for i in range(10)], name="b")
    result = compare_models(a, b)
    assert result.model_names == ("a", "b")
    assert all(d > 0 for d in result.per_repetition_diffs)
    assert result.test_method == "exact"
    assert result.p_value == pytest.approx(2 / 1024)
    assert result.medians[0] > result.medians[1]
    assert result.timings_seconds == (10.0, 10.0)
    assert result.to_dict(timings=False)["timings_seconds"] is None


@pytest.mark.parametrize("other", [
    {"values": [0.1] * 9},
    {"values": [0.1] * 10, "seed": 1},
    {"values": [0.1] * 10, "metric": "press"},
])
def test_unpaired_reports_are_refused(make_report, other):
    a = make_report([0.2] * 10)
    with pytest.raises(PairingError):
        compare_models(a, make_report(name="b", **other))


def test_compare_all_in_config_order(make_report):
    reports = [make_report([float(i + k) for i in range(4)], name=n) for k, n in enumerate("abc")]
    pairs = [c.model_names for c in compare_all(reports)]
    assert pairs == [("a", "b"), ("a", "c"), ("b", "c")]


def test_compare_models_is_symmetric_in_p(make_report):
    gen = np.random.default_rng(2)
    a = make_report(gen.standard_normal(12), name="a")
    b = make_report(gen.standard_normal(12), name="b")
    ab, ba = compare_models(a, b), compare_models(b, a)
    assert ab.p_value == ba.p_value
    assert ab.per_repetition_diffs == [-d for d in ba.per_repetition_diffs]


def test_comparison_with_a_leaky_report_carries_the_watermark(make_report):
    a = make_report([0.1, 0.2, 0.3], name="a")
    b = make_report([0.3, 0.2, 0.4], name="b")
    assert compare_models(a, b).watermark is None
    b.watermark = settings.LEAKAGE_WATERMARK
    assert compare_models(a, b).watermark == settings.LEAKAGE_WATERMARK
    assert compare_models(b, a).watermark == settings.LEAKAGE_WATERMARK


# Refit, fallbacks and flags
@pytest.fixture
def one_informative():
    gen = np.random.default_rng(8)
    X = gen.standard_normal((30, 5))
    y = 3.0 * X[:, 2] + 0.1 * gen.standard_normal(30)
    return Dataset(X=X, Y=y[:, None])


def test_refit_caps_components_at_the_selected_variables(one_informative):
    sel = SelectionSpec("sr", threshold=5.0)
    spec = PipelineSpec(selection_grid=(sel,), n_lv_grid=(0, 3))
    point = GridPoint(3, sel)
    dropped, flags = _grid_models(one_informative, spec, [point])
    assert dropped == []
    assert "cannot carry 3 LVs" in flags[0]
    candidates, flags = _grid_models(one_informative, spec, [point], cap_lv=True)
    assert candidates[0].point == GridPoint(1, sel)
    assert candidates[0].model.n_lv == 1
    assert candidates[0].selected.tolist() == [2]
    assert any("refit capped at 1 LVs" in msg for msg in flags)


def test_infinite_selectivity_ratio_is_flagged():
    x = np.linspace(-1.0, 1.0, 12)
    ds = Dataset(X=np.column_stack([x, 2.0 * x]), Y=(x + 0.01 * np.sin(7 * x))[:, None])
    sel = SelectionSpec("sr", threshold=1.0)
    candidates, flags = _grid_models(ds, PipelineSpec(selection_grid=(sel,), n_lv_grid=(0, 1)), [GridPoint(1, sel)])
    assert candidates[0].selected.tolist() == [0, 1]
    assert any("selectivity ratio +inf" in msg and "2 variable(s)" in msg for msg in flags)


def test_undefined_inner_auroc_falls_back_to_the_mean_model(rng):
    gen = np.random.default_rng(4)
    labels = np.zeros(16)
    labels[5] = 1.0
    ds = Dataset(X=gen.standard_normal((16, 3)), Y=labels[:, None])
    spec = PipelineSpec(model="plsda", n_lv_grid=(0, 1, 2), inner_policy=SplitPolicy(n_folds=4),
                        metric=MetricSpec.from_name("auroc", positive_class=1.0))
    selection = inner_cv_select(ds, spec, rng)
    assert selection.chosen.n_lv == 0
    assert selection.value is None
    assert selection.curve == {}
    assert any("fell back to the 0-LV model" in msg for msg in selection.flags)


@pytest.mark.parametrize("seed", range(6))
def test_auroc_double_cv_survives_fewer_positives_than_folds(seed):
    gen = np.random.default_rng(seed)
    labels = np.zeros(40)
    labels[gen.choice(40, size=3, replace=False)] = 1.0
    X = gen.standard_normal((40, 4))
    X[labels == 1, 0] += 2.0
    spec = PipelineSpec(model="plsda", n_lv_grid=(0, 1, 2), metric=MetricSpec.from_name("auroc"), seed=seed,
                        **FAST)
    report = double_cv(Dataset(X=X, Y=labels[:, None]), spec)
    assert 0.0 <= report.summary["median"] <= 1.0
    assert all(len(rep.chosen) == 5 for rep in report.per_repetition)


# Uncertainty-aware selection
def test_one_se_rule_prefers_the_simpler_point_within_one_error():
    spec = PipelineSpec(selection_rule="one_se", metric=MetricSpec.from_name("q2"))
    table = [
        {"point": GridPoint(0, SelectionSpec()), "value": 0.45, "n_selected": 5.0},
        {"point": GridPoint(1, SelectionSpec()), "value": 0.58, "n_selected": 5.0},
        {"point": GridPoint(3, SelectionSpec()), "value": 0.60, "n_selected": 5.0,
         "fold_values": [0.3, 0.9, 0.5, 0.7]},
    ]
    chosen, flag = one_se_choice(spec, table, table[2])
    assert chosen is table[1]  # se = 0.129, so 0.58 is inside and 0.45 is not
    assert flag is None


def test_one_se_rule_keeps_the_best_point_without_fold_spread():
    spec = PipelineSpec(selection_rule="one_se")
    best = {"point": GridPoint(2, SelectionSpec()), "value": 0.6, "n_selected": 5.0, "fold_values": [0.6]}
    chosen, flag = one_se_choice(spec, [best], best)
    assert chosen is best
    assert "2 defined inner folds" in flag


def test_one_se_rule_is_never_less_parsimonious_on_null_data(rng):
    for seed in range(5):
        ds = gen_fig4(RngStream(seed))
        best = inner_cv_select(ds, PipelineSpec(n_lv_grid=tuple(range(7)), metric=MetricSpec.from_name("press")),
                               rng)
        one_se = inner_cv_select(ds, PipelineSpec(n_lv_grid=tuple(range(7)), metric=MetricSpec.from_name("press"),
                                                  selection_rule="one_se"), rng)
        assert one_se.chosen.n_lv <= best.chosen.n_lv
        assert one_se.curve == best.curve


def test_selection_rule_is_validated():
    with pytest.raises(ConfigError, match="selection_rule"):
        PipelineSpec(selection_rule="median")
    assert PipelineSpec(selection_rule="one_se").to_dict()["selection_rule"] == "one_se"


# Per-observation uncertainty
def test_single_repetition_report_has_an_observation_bootstrap(linear_dataset):
    report = double_cv(linear_dataset, small_spec())
    assert report.bootstrap is None
    obs = report.bootstrap_observations
    assert obs["loss"] == "squared_error"
    assert obs["interval"][0] <= obs["mean"] <= obs["interval"][1]
    losses = observation_losses(PipelineSpec(), report.per_repetition)
    assert losses.size == 30
    assert obs["mean"] == pytest.approx(losses.mean())
    press = sum(np.sum((np.array(rep.predictions["y_true"]) - np.array(rep.predictions["y_pred"])) ** 2)
                for rep in report.per_repetition)
    assert losses.sum() == pytest.approx(press)
    assert ValidationReport.from_dict(json.loads(report.to_json())).bootstrap_observations == obs


def test_observation_losses_average_over_repetitions(class_dataset):
    report = double_cv(class_dataset, PipelineSpec(model="plsda", n_lv_grid=(0, 1), n_repetitions=3, **FAST))
    losses = observation_losses(PipelineSpec(model="plsda"), report.per_repetition)
    assert losses.size == 40
    assert np.all((losses >= 0) & (losses <= 1))
    assert report.bootstrap_observations["loss"] == "misclassification"
    assert losses.sum() * 3 == pytest.approx(sum(rep.value for rep in report.per_repetition))
