"""
# Dataprep - learnable preprocessing and split strategies
# Variable-wise preprocessing is fitted on build rows only and replayed on test rows
# Row-internal preprocessing uses each row's own statistics
"""

import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from valguard import settings
from valguard.core import Dataset, RngStream, column_means, column_sds
from valguard.errors import ConfigError, DegenerateError, ShapeError, SplitError

PREPROC_KINDS = ("none", "mean_center", "autoscale", "row_normalize", "interval_center")
VARIABLE_WISE = ("none", "mean_center", "autoscale")
ROW_INTERNAL = ("row_normalize", "interval_center")

SPLIT_KINDS = ("random", "stratified", "grouped", "time_blocked")
EXCLUDED = -1


@dataclass(frozen=True)
class PreprocSpec:
    kind: str = "mean_center"
    # interval start indices; interval k spans [bounds[k], bounds[k+1])
    intervals: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in PREPROC_KINDS:
            raise ConfigError(f"unknown preprocessing kind '{self.kind}'", "preproc.kind")
        if self.kind == "interval_center":
            if not self.intervals:
                raise ConfigError("interval_center needs interval boundaries", "preproc.intervals")
            bounds = tuple(int(b) for b in self.intervals)
            if bounds[0] != 0:
                raise ConfigError("interval boundaries must start at 0", "preproc.intervals")
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ConfigError("interval boundaries must be strictly increasing", "preproc.intervals")
            object.__setattr__(self, "intervals", bounds)
        elif self.intervals is not None:
            raise ConfigError(f"intervals only apply to interval_center, not {self.kind}", "preproc.intervals")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.intervals is not None:
            out["intervals"] = list(self.intervals)
        return out


@dataclass(frozen=True)
class FittedPreproc:
    kind: str
    n_vars: int
    means: np.ndarray | None = None
    scales: np.ndarray | None = None
    intervals: tuple[int, ...] | None = None

    @property
    def row_internal(self) -> bool:
        return self.kind in ROW_INTERNAL

    def inverse(self, Z: np.ndarray) -> np.ndarray:
        """Undo a variable-wise transform (used to bring predictions back to Y units)."""
        if self.row_internal:
            raise ConfigError(f"{self.kind} cannot be inverted", "preproc.kind")
        return Z * self.scales + self.means

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "means": None if self.means is None else self.means.tolist(),
            "scales": None if self.scales is None else self.scales.tolist(),
            "intervals": None if self.intervals is None else list(self.intervals),
        }


def fit_preproc(spec: PreprocSpec, X_build: np.ndarray) -> FittedPreproc:
    n, p = X_build.shape
    if n == 0:
        raise ShapeError("cannot fit preprocessing on zero rows")
    if spec.kind in ROW_INTERNAL:
        if spec.kind == "interval_center" and spec.intervals[-1] >= p:
            raise ConfigError(f"interval boundary {spec.intervals[-1]} beyond {p} variables", "preproc.intervals")
        return FittedPreproc(spec.kind, p, intervals=spec.intervals)
    if spec.kind == "none":
        return FittedPreproc("none", p, np.zeros(p), np.ones(p))
    means = column_means(X_build)
    if spec.kind == "mean_center":
        return FittedPreproc("mean_center", p, means, np.ones(p))
    sds = column_sds(X_build)
    zero = np.flatnonzero(sds <= np.finfo(float).eps * np.maximum(1.0, np.abs(means)))
    if zero.size:
        raise DegenerateError(f"zero-variance column {int(zero[0])} under autoscale")
    return FittedPreproc("autoscale", p, means, sds)


def apply_preproc(fp: FittedPreproc, X_any: np.ndarray) -> np.ndarray:
    if X_any.shape[1] != fp.n_vars:
        raise ShapeError(f"preprocessing fitted on {fp.n_vars} columns, got {X_any.shape[1]}")
    if fp.kind == "row_normalize":
        norms = np.linalg.norm(X_any, axis=1, keepdims=True)
        return np.divide(X_any, norms, out=np.zeros_like(X_any, dtype=float), where=norms > 0)
    if fp.kind == "interval_center":
        out = np.array(X_any, dtype=float)
        bounds = list(fp.intervals) + [fp.n_vars]
        for start, stop in zip(bounds[:-1], bounds[1:]):
            block = out[:, start:stop]
            out[:, start:stop] = block - block.mean(axis=1, keepdims=True)
        return out
    return (X_any - fp.means) / fp.scales


# Preprocessing chains
def fit_chain(specs: Sequence[PreprocSpec], X_build: np.ndarray) -> tuple[FittedPreproc, ...]:
    """Fit each step on the output of the previous one."""
    fitted = []
    current = X_build
    for spec in specs:
        fp = fit_preproc(spec, current)
        fitted.append(fp)
        current = apply_preproc(fp, current)
    return tuple(fitted)


def apply_chain(chain: Sequence[FittedPreproc], X_any: np.ndarray) -> np.ndarray:
    out = X_any
    for fp in chain:
        out = apply_preproc(fp, out)
    return out


def invert_chain(chain: Sequence[FittedPreproc], Z: np.ndarray) -> np.ndarray:
    out = Z
    for fp in reversed(chain):
        out = fp.inverse(out)
    return out


# Splitting
@dataclass(frozen=True)
class SplitPolicy:
    kind: str = "random"
    n_folds: int | None = None
    gap: int = 0
    strat_labels_source: int = 0

    def __post_init__(self):
        if self.kind not in SPLIT_KINDS:
            raise ConfigError(f"unknown split kind '{self.kind}'", "policy.kind")
        if self.n_folds is not None and self.n_folds < 2:
            raise ConfigError(f"n_folds must be at least 2, got {self.n_folds}", "policy.n_folds")
        if self.gap < 0:
            raise ConfigError(f"gap must be non-negative, got {self.gap}", "policy.gap")
        if self.gap and self.kind != "time_blocked":
            raise ConfigError("gap only applies to time_blocked splits", "policy.gap")

    def resolve_folds(self, n_rows: int, outer: bool = True) -> int:
        """Concrete fold count; None means LOO for small data, else 10 outer / 7 inner."""
        if self.n_folds is not None:
            k = self.n_folds
        elif n_rows <= settings.LOO_MAX_ROWS:
            k = n_rows
        else:
            k = settings.DEFAULT_OUTER_FOLDS if outer else settings.DEFAULT_INNER_FOLDS
        if k > n_rows:
            raise SplitError(f"{k} folds requested for {n_rows} rows")
        return k

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_folds": self.n_folds,
            "gap": self.gap,
            "strat_labels_source": self.strat_labels_source,
        }


@dataclass(frozen=True)
class SplitPlan:
    fold_of_row: np.ndarray

    @property
    def n_folds(self) -> int:
        return int(self.fold_of_row.max()) + 1

    def folds(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """(build rows, test rows) for every fold, excluded rows in neither."""
        for f in range(self.n_folds):
            test = np.flatnonzero(self.fold_of_row == f)
            build = np.flatnonzero((self.fold_of_row != f) & (self.fold_of_row != EXCLUDED))
            yield build, test

    def to_json(self) -> str:
        return json.dumps([int(f) for f in self.fold_of_row])


def _chunk(order: np.ndarray, k: int) -> np.ndarray:
    fold_of_row = np.empty(order.size, dtype=int)
    for f, chunk in enumerate(np.array_split(order, k)):
        fold_of_row[chunk] = f
    return fold_of_row


def _random_split(n: int, k: int, gen: np.random.Generator) -> np.ndarray:
    return _chunk(gen.permutation(n), k)


def _stratified_split(labels: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    classes, counts = np.unique(labels, return_counts=True)
    for c, count in zip(classes, counts):
        if count < k:
            raise SplitError(f"class {c} has {count} rows, fewer than {k} folds")
    fold_of_row = np.empty(labels.size, dtype=int)
    offset = 0
    for c in classes:
        rows = gen.permutation(np.flatnonzero(labels == c))
        # continue the round-robin where the previous class stopped so fold sizes stay level
        fold_of_row[rows] = (offset + np.arange(rows.size)) % k
        offset = (offset + rows.size) % k
    return fold_of_row


def _grouped_split(groups: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    names, inverse, sizes = np.unique(groups, return_inverse=True, return_counts=True)
    if names.size < k:
        raise SplitError(f"{names.size} groups cannot fill {k} folds")
    # shuffle first so equal-size groups are not always placed in label order
    order = gen.permutation(names.size)
    order = order[np.argsort(-sizes[order], kind="stable")]
    load = np.zeros(k, dtype=int)
    fold_of_group = np.empty(names.size, dtype=int)
    for g in order:
        f = int(np.argmin(load))
        fold_of_group[g] = f
        load[f] += sizes[g]
    return fold_of_group[inverse]


def _time_blocked_split(timestamps: np.ndarray, k: int, gap: int) -> np.ndarray:
    # rows sharing a timestamp form one unit; blocks are cut between units only
    stamps, unit_of_row, counts = np.unique(timestamps, return_inverse=True, return_counts=True)
    if stamps.size < k:
        raise SplitError(f"{stamps.size} distinct timestamps cannot fill {k} time blocks")
    n = timestamps.size
    edges = np.cumsum(counts)[:-1]
    cuts: list[int] = []
    lo = 0
    for f in range(1, k):
        hi = edges.size - (k - 1 - f)
        j = lo + int(np.argmin(np.abs(edges[lo:hi] - f * n / k)))
        cuts.append(j)
        lo = j + 1
    fold_of_unit = np.searchsorted(np.array(cuts), np.arange(stamps.size), side="left")
    fold_of_row = fold_of_unit[unit_of_row.ravel()]
    if gap:
        order = np.argsort(timestamps, kind="stable")
        for j in cuts:
            boundary = int(edges[j])
            fold_of_row[order[max(boundary - gap, 0):boundary + gap]] = EXCLUDED
        for f in range(k):
            if not np.any(fold_of_row == f):
                raise SplitError(f"gap {gap} leaves time block {f} empty")
    return fold_of_row


def make_split(policy: SplitPolicy, ds: Dataset, rng: RngStream, outer: bool = True) -> SplitPlan:
    n = ds.n_rows
    k = policy.resolve_folds(n, outer)
    gen = rng.generator()
    if policy.kind == "random":
        fold_of_row = _random_split(n, k, gen)
    elif policy.kind == "stratified":
        if ds.Y is None or policy.strat_labels_source >= ds.Y.shape[1]:
            raise SplitError(f"stratified split needs class labels in Y column {policy.strat_labels_source}")
        fold_of_row = _stratified_split(ds.Y[:, policy.strat_labels_source], k, gen)
    elif policy.kind == "grouped":
        if ds.group_labels is None:
            raise SplitError("grouped split needs group labels")
        fold_of_row = _grouped_split(ds.group_labels, k, gen)
    else:
        if ds.timestamps is None:
            raise SplitError("time_blocked split needs timestamps")
        fold_of_row = _time_blocked_split(ds.timestamps, k, policy.gap)
    fold_of_row.setflags(write=False)
    return SplitPlan(fold_of_row)
