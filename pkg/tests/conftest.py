import numpy as np
import pytest

from valguard import console
from valguard.core import Dataset, RngStream
from valguard.reporting import RepetitionResult, ValidationReport


@pytest.fixture(autouse=True)
def quiet_console():
    console.set_quiet(True)
    yield
    console.set_quiet(False)


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def linear_dataset():
    """y is an exact linear function of X (30 x 5)."""
    gen = np.random.default_rng(0)
    X = gen.standard_normal((30, 5))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0, 0.0])
    return Dataset(X=X, Y=y[:, None])


@pytest.fixture
def class_dataset():
    """Two well separated classes (labels 0 and 1), 20 rows each, 6 variables."""
    gen = np.random.default_rng(1)
    X = gen.standard_normal((40, 6))
    labels = np.repeat([0.0, 1.0], 20)
    X[labels == 1, :2] += 4.0
    return Dataset(X=X, Y=labels[:, None])


def _make_report(values, name="a", seed=0, metric="q2", seconds=1.0):
    reps = [RepetitionResult(index=i, value=float(v), fold_values=[], chosen=[], seconds=seconds, curve={0: 0.0})
            for i, v in enumerate(values)]
    values = np.asarray(values, dtype=float)
    return ValidationReport(
        pipeline_name=name,
        pipeline={"outer_policy": {"kind": "random", "n_folds": None, "gap": 0, "strat_labels_source": 0}},
        metric={"name": metric, "orientation": "higher_better", "params": {}, "positive_class": None},
        seed=seed,
        n_repetitions=len(reps),
        per_repetition=reps,
        summary={"mean": float(values.mean()), "sd": 0.0, "median": float(np.median(values)), "iqr": 0.0},
    )


@pytest.fixture
def make_report():
    """Factory for ValidationReports carrying only per-repetition values."""
    return _make_report
