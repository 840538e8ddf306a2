"""
# Core - matrices, datasets, seeded random streams and CSV ingestion
# Matrices are read-only float64 numpy arrays validated on construction
# Datasets hand out rows only through take(), which can be audited
"""

import contextlib
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np
import pandas as pd

from valguard.errors import DataError, ShapeError

ROW_PURPOSES = (
    "build",
    "inner_train",
    "inner_validate",
    "outer_test",
    "baseline",
    "leaky_selection",
    "permutation",
)


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and freeze a 2-D finite float64 matrix."""
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DataError(f"{name}: values are not numeric ({e})")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected 2 dimensions, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"{name}: non-finite value at ({bad[0]},{bad[1]})")
    arr.setflags(write=False)
    return arr


# Matrix operations
def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    return a.T


def column_slice(a: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    cols = np.asarray(cols, dtype=int)
    if cols.size and (cols.min() < -a.shape[1] or cols.max() >= a.shape[1]):
        raise ShapeError(f"column index out of range for {a.shape[1]} columns")
    return a[:, cols]


def row_gather(a: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Rows in the requested order."""
    idx = np.asarray(indices, dtype=int)
    if idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise ShapeError(f"row index out of range for {a.shape[0]} rows")
    return a[idx, :]


def frobenius_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, "fro"))


def column_means(a: np.ndarray) -> np.ndarray:
    if a.shape[0] == 0:
        raise ShapeError("column means of an empty matrix")
    return a.mean(axis=0)


def column_sds(a: np.ndarray) -> np.ndarray:
    """Sample standard deviations (n-1 denominator)."""
    if a.shape[0] < 2:
        raise ShapeError("column standard deviations need at least 2 rows")
    return a.std(axis=0, ddof=1)


# Random streams
def _derive_stream_id(*parts: int) -> int:
    digest = hashlib.blake2b(
        b"".join((int(p) & (2**64 - 1)).to_bytes(8, "little") for p in parts),
        digest_size=8,
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence([self.seed & (2**64 - 1), self.stream_id & (2**64 - 1)])
        return np.random.Generator(np.random.PCG64(seq))

    def spawn(self, *indices: int) -> "RngStream":
        """Child stream for a task; depends only on the task indices."""
        return RngStream(self.seed, _derive_stream_id(self.stream_id, *indices))


def standard_normal_matrix(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ShapeError(f"standard normal matrix needs positive dimensions, got {rows}x{cols}")
    return as_matrix(rng.generator().standard_normal((rows, cols)), "normal")


# Row access auditing
@dataclass(frozen=True)
class RowAccess:
    purpose: str
    row_ids: tuple[int, ...]


_ACCESS_HOOKS: list[Callable[[RowAccess], None]] = []


@contextlib.contextmanager
def row_access_audit() -> Iterator[list[RowAccess]]:
    """Record every Dataset.take() made inside the block."""
    records: list[RowAccess] = []
    _ACCESS_HOOKS.append(records.append)
    try:
        yield records
    finally:
        _ACCESS_HOOKS.remove(records.append)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray | None = None
    group_labels: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    variable_names: tuple[str, ...] | None = None
    row_ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        object.__setattr__(self, "X", X)
        n = X.shape[0]
        if self.Y is not None:
            Y = as_matrix(self.Y, "Y")
            if Y.shape[0] != n:
                raise ShapeError(f"Y has {Y.shape[0]} rows, X has {n}")
            object.__setattr__(self, "Y", Y)
        for name in ("group_labels", "timestamps"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value)
                if value.shape != (n,):
                    raise ShapeError(f"{name} has length {value.shape[0]}, X has {n} rows")
                value.setflags(write=False)
                object.__setattr__(self, name, value)
        if self.variable_names is not None:
            names = tuple(str(v) for v in self.variable_names)
            if len(names) != X.shape[1]:
                raise ShapeError(f"{len(names)} variable names for {X.shape[1]} columns")
            object.__setattr__(self, "variable_names", names)
        row_ids = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids, dtype=int)
        if row_ids.shape != (n,):
            raise ShapeError("row_ids length does not match X")
        row_ids.setflags(write=False)
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_vars(self) -> int:
        return self.X.shape[1]

    def take(self, indices: Sequence[int], purpose: str) -> "Dataset":
        """Row view for one stage of the validation pipeline."""
        if purpose not in ROW_PURPOSES:
            raise ValueError(f"unknown row purpose '{purpose}'")
        idx = np.asarray(indices, dtype=int)
        view = Dataset(
            X=row_gather(self.X, idx),
            Y=None if self.Y is None else row_gather(self.Y, idx),
            group_labels=None if self.group_labels is None else self.group_labels[idx],
            timestamps=None if self.timestamps is None else self.timestamps[idx],
            variable_names=self.variable_names,
            row_ids=self.row_ids[idx],
        )
        if _ACCESS_HOOKS:
            record = RowAccess(purpose, tuple(int(r) for r in view.row_ids))
            for hook in list(_ACCESS_HOOKS):
                hook(record)
        return view

    def with_y(self, Y) -> "Dataset":
        return replace(self, Y=Y)

    def with_x(self, X) -> "Dataset":
        return replace(self, X=X)

    def require_y(self) -> np.ndarray:
        if self.Y is None:
            raise DataError("dataset has no Y block")
        return self.Y


# CSV ingestion
def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def _resolve_columns(selector, header: list[str], what: str) -> list[int]:
    if selector is None:
        return []
    if isinstance(selector, (str, int)):
        selector = [selector]
    resolved = []
    n = len(header)
    for item in selector:
        if isinstance(item, int) and not isinstance(item, bool):
            if not -n <= item < n:
                raise DataError(f"{what} references absent column {item} (file has {n} columns)")
            resolved.append(item % n)
        elif str(item) in header:
            resolved.append(header.index(str(item)))
        elif str(item).lstrip("-").isdigit():
            resolved.extend(_resolve_columns(int(item), header, what))
        else:
            raise DataError(f"{what} references absent column '{item}'")
    return resolved


def load_dataset(path, y_cols=None, group_col=None, time_col=None) -> Dataset:
    """Read a numeric CSV and route its columns to X, Y, groups and timestamps."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.ParserError as e:
        raise DataError(f"ragged rows in {path}: {e}")
    except pd.errors.EmptyDataError:
        raise DataError(f"empty data file: {path}")

    missing = raw.isna().to_numpy()
    if missing.any():
        row = int(np.argwhere(missing)[0][0])
        raise DataError(f"ragged row {row} in {path}: expected {raw.shape[1]} cells")

    cells = raw.to_numpy()
    has_header = any(not _is_number(c) for c in cells[0])
    if has_header:
        header = [str(c).strip() for c in cells[0]]
        cells = cells[1:]
    else:
        header = [str(i) for i in range(cells.shape[1])]
    if cells.shape[0] == 0:
        raise DataError(f"no data rows in {path}")

    y_idx = _resolve_columns(y_cols, header, "y_cols")
    group_idx = _resolve_columns(group_col, header, "group_col")
    time_idx = _resolve_columns(time_col, header, "time_col")
    annotated = set(group_idx) | set(time_idx)
    x_idx = [j for j in range(len(header)) if j not in set(y_idx) | annotated]

    def numeric_block(columns: list[int]) -> np.ndarray:
        block = np.empty((cells.shape[0], len(columns)))
        for k, j in enumerate(columns):
            for i, cell in enumerate(cells[:, j]):
                text = str(cell).strip()
                if not _is_number(text):
                    raise DataError(f"non-numeric cell at ({i},{j}): '{cell}'")
                block[i, k] = float(text)
        if not np.all(np.isfinite(block)):
            i, k = np.argwhere(~np.isfinite(block))[0]
            raise DataError(f"non-finite cell at ({i},{columns[k]})")
        return block

    timestamps = None
    if time_idx:
        column = [str(c).strip() for c in cells[:, time_idx[0]]]
        timestamps = (
            np.array([float(c) for c in column]) if all(_is_number(c) for c in column)
            else np.array(column)
        )

    return Dataset(
        X=numeric_block(x_idx),
        Y=numeric_block(y_idx) if y_idx else None,
        group_labels=np.array([str(c).strip() for c in cells[:, group_idx[0]]]) if group_idx else None,
        timestamps=timestamps,
        variable_names=tuple(header[j] for j in x_idx) if has_header else None,
    )


def write_dataset(ds: Dataset, path) -> Path:
    """Write a Dataset as a CSV with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(ds.variable_names or [f"x{j}" for j in range(ds.n_vars)])
    frame = pd.DataFrame(np.asarray(ds.X), columns=names)
    if ds.Y is not None:
        for j in range(ds.Y.shape[1]):
            frame[f"y{j}"] = ds.Y[:, j]
    if ds.group_labels is not None:
        frame["group"] = ds.group_labels
    if ds.timestamps is not None:
        frame["time"] = ds.timestamps
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
