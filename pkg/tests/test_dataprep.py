import numpy as np
import pytest

from valguard.core import Dataset, RngStream
from valguard.dataprep import (
    EXCLUDED,
    PreprocSpec,
    SplitPolicy,
    apply_chain,
    apply_preproc,
    fit_chain,
    fit_preproc,
    invert_chain,
    make_split,
)
from valguard.errors import ConfigError, DegenerateError, SplitError


@pytest.fixture
def block():
    return np.random.default_rng(0).standard_normal((12, 4)) * [1.0, 2.0, 3.0, 4.0] + [5.0, 0.0, -1.0, 2.0]


def test_autoscale_uses_build_statistics_only(block):
    build, test = block[:8], block[8:]
    fp = fit_preproc(PreprocSpec("autoscale"), build)
    assert np.allclose(fp.means, build.mean(axis=0))
    assert np.allclose(fp.scales, build.std(axis=0, ddof=1))
    assert np.allclose(apply_preproc(fp, test), (test - build.mean(axis=0)) / build.std(axis=0, ddof=1))
    scaled = apply_preproc(fp, build)
    assert np.allclose(scaled.mean(axis=0), 0.0)
    assert np.allclose(scaled.std(axis=0, ddof=1), 1.0)


def test_autoscale_zero_variance_column_is_degenerate(block):
    block = block.copy()
    block[:, 2] = 3.0
    with pytest.raises(DegenerateError, match="column 2"):
        fit_preproc(PreprocSpec("autoscale"), block)


def test_mean_center_keeps_scale(block):
    fp = fit_preproc(PreprocSpec("mean_center"), block)
    assert np.allclose(apply_preproc(fp, block), block - block.mean(axis=0))


def test_row_normalize_gives_unit_rows(block):
    fp = fit_preproc(PreprocSpec("row_normalize"), block[:5])
    out = apply_preproc(fp, block)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0)


def test_interval_center_zeroes_each_interval_mean(block):
    fp = fit_preproc(PreprocSpec("interval_center", intervals=(0, 2)), block)
    out = apply_preproc(fp, block)
    assert np.allclose(out[:, :2].mean(axis=1), 0.0)
    assert np.allclose(out[:, 2:].mean(axis=1), 0.0)


@pytest.mark.parametrize("intervals", [(1, 2), (0, 2, 2), None])
def test_interval_specs_are_validated(intervals):
    with pytest.raises(ConfigError):
        PreprocSpec("interval_center", intervals=intervals)


def test_interval_beyond_width_is_rejected(block):
    with pytest.raises(ConfigError):
        fit_preproc(PreprocSpec("interval_center", intervals=(0, 4)), block)


def test_unknown_kind():
    with pytest.raises(ConfigError, match="preproc.kind"):
        PreprocSpec("whiten")


def test_chain_row_internal_then_centering(block):
    chain = fit_chain((PreprocSpec("row_normalize"), PreprocSpec("mean_center")), block)
    out = apply_chain(chain, block)
    assert np.allclose(out.mean(axis=0), 0.0)


def test_invert_chain_restores_original(block):
    chain = fit_chain((PreprocSpec("autoscale"),), block)
    assert np.allclose(invert_chain(chain, apply_chain(chain, block)), block)


def test_resolve_folds_defaults():
    policy = SplitPolicy()
    assert policy.resolve_folds(20) == 20
    assert policy.resolve_folds(100, outer=True) == 10
    assert policy.resolve_folds(100, outer=False) == 7
    with pytest.raises(SplitError):
        SplitPolicy(n_folds=6).resolve_folds(5)


@pytest.mark.parametrize("kwargs", [{"kind": "shuffle"}, {"n_folds": 1}, {"gap": -1}, {"kind": "random", "gap": 2}])
def test_policy_validation(kwargs):
    with pytest.raises(ConfigError):
        SplitPolicy(**kwargs)


def test_random_split_partitions_rows():
    ds = Dataset(X=np.zeros((23, 1)))
    plan = make_split(SplitPolicy(n_folds=5), ds, RngStream(1))
    sizes = np.bincount(plan.fold_of_row)
    assert sizes.sum() == 23 and sizes.max() - sizes.min() <= 1
    tested = np.concatenate([test for _, test in plan.folds()])
    assert sorted(tested.tolist()) == list(range(23))
    for build, test in plan.folds():
        assert not set(build) & set(test)
    again = make_split(SplitPolicy(n_folds=5), ds, RngStream(1))
    assert np.array_equal(plan.fold_of_row, again.fold_of_row)


def test_stratified_split_balances_classes():
    labels = np.repeat([0.0, 1.0], [20, 10])
    ds = Dataset(X=np.zeros((30, 1)), Y=labels)
    plan = make_split(SplitPolicy("stratified", n_folds=5), ds, RngStream(2))
    for _, test in plan.folds():
        assert np.sum(labels[test] == 0) == 4
        assert np.sum(labels[test] == 1) == 2


def test_stratified_split_rejects_small_class():
    ds = Dataset(X=np.zeros((12, 1)), Y=np.repeat([0.0, 1.0], [10, 2]))
    with pytest.raises(SplitError, match="class 1"):
        make_split(SplitPolicy("stratified", n_folds=3), ds, RngStream(0))


def test_grouped_split_keeps_groups_together():
    groups = np.repeat(["a", "b", "c", "d", "e", "f"], [1, 2, 3, 4, 2, 3])
    ds = Dataset(X=np.zeros((groups.size, 1)), group_labels=groups)
    plan = make_split(SplitPolicy("grouped", n_folds=3), ds, RngStream(4))
    for g in np.unique(groups):
        assert np.unique(plan.fold_of_row[groups == g]).size == 1
    assert np.unique(plan.fold_of_row).size == 3


def test_grouped_split_needs_enough_groups():
    ds = Dataset(X=np.zeros((4, 1)), group_labels=np.array(["a", "a", "b", "b"]))
    with pytest.raises(SplitError):
        make_split(SplitPolicy("grouped", n_folds=3), ds, RngStream(0))


def test_time_blocked_split_with_gap():
    timestamps = np.arange(20.0)[::-1]
    ds = Dataset(X=np.zeros((20, 1)), timestamps=timestamps)
    plan = make_split(SplitPolicy("time_blocked", n_folds=4, gap=1), ds, RngStream(0))
    excluded = np.sort(timestamps[plan.fold_of_row == EXCLUDED])
    assert excluded.tolist() == [4.0, 5.0, 9.0, 10.0, 14.0, 15.0]
    for build, test in plan.folds():
        times = np.sort(timestamps[test])
        assert np.all(np.diff(times) == 1.0)
        assert not np.isin(build, np.flatnonzero(plan.fold_of_row == EXCLUDED)).any()
    assert "-1" in plan.to_json()


def test_time_blocked_split_needs_timestamps():
    with pytest.raises(SplitError, match="timestamps"):
        make_split(SplitPolicy("time_blocked", n_folds=2), Dataset(X=np.zeros((4, 1))), RngStream(0))


@pytest.mark.parametrize("timestamps,k", [
    ([0, 1, 2, 2, 2, 2, 3, 4], 2),
    ([5, 5, 5, 1, 1, 2, 3, 3, 3, 4, 6, 6], 3),
    ([0, 0, 1, 1, 2, 2, 3, 3], 4),
])
def test_time_blocked_split_never_splits_a_timestamp(timestamps, k):
    timestamps = np.array(timestamps, dtype=float)
    ds = Dataset(X=np.zeros((timestamps.size, 1)), timestamps=timestamps)
    plan = make_split(SplitPolicy("time_blocked", n_folds=k), ds, RngStream(0))
    assert plan.n_folds == k
    for f in range(k - 1):
        assert timestamps[plan.fold_of_row == f].max() < timestamps[plan.fold_of_row == f + 1].min()


def test_time_blocked_split_needs_enough_distinct_timestamps():
    ds = Dataset(X=np.zeros((6, 1)), timestamps=np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0]))
    with pytest.raises(SplitError, match="distinct timestamps"):
        make_split(SplitPolicy("time_blocked", n_folds=3), ds, RngStream(0))
