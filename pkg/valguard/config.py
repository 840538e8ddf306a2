"""
# Config - JSON run configurations
# parse_config() validates a raw dict into typed specs; RunConfig.to_dict() writes it back
# Every error names the offending field path, e.g. pipelines[0].selection_grid[1].threshold
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from valguard import settings
from valguard.core import Dataset, load_dataset
from valguard.dataprep import PreprocSpec, SplitPolicy
from valguard.engine import PipelineSpec
from valguard.errors import ConfigError, DataError
from valguard.metrics import MetricSpec
from valguard.plsfamily import SelectionSpec
from valguard.simgen import ScenarioSpec, build_scenario

TOP_LEVEL_KEYS = {"schema_version", "seed", "data", "scenario", "pipelines", "permutation", "outputs",
                  "demonstrate_leakage", "n_boot"}
DATA_KEYS = {"path", "y_cols", "group_col", "time_col"}
PIPELINE_KEYS = {"name", "model", "x_preproc", "y_preproc", "selection_grid", "keep_k_grid", "n_lv_grid",
                 "inner_policy", "outer_policy", "metric", "n_repetitions", "leaky", "disclosure",
                 "selection_rule"}
PERMUTATION_KEYS = {"enabled", "n_perm", "block"}
OUTPUT_KEYS = {"report_path", "curves_dir"}


@dataclass(frozen=True)
class DataSource:
    path: str
    y_cols: tuple = ()
    group_col: str | int | None = None
    time_col: str | int | None = None

    def to_dict(self) -> dict:
        return {"path": self.path, "y_cols": list(self.y_cols), "group_col": self.group_col,
                "time_col": self.time_col}


@dataclass(frozen=True)
class PermutationSettings:
    enabled: bool = False
    n_perm: int = 99
    block: str = "Y"

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "n_perm": self.n_perm, "block": self.block}


@dataclass(frozen=True)
class OutputSettings:
    report_path: str = "report.json"
    curves_dir: str = "curves"

    def to_dict(self) -> dict:
        return {"report_path": self.report_path, "curves_dir": self.curves_dir}


@dataclass(frozen=True)
class RunConfig:
    pipelines: tuple[PipelineSpec, ...]
    data: DataSource | None = None
    scenario: ScenarioSpec | None = None
    seed: int = 0
    permutation: PermutationSettings = PermutationSettings()
    outputs: OutputSettings = OutputSettings()
    demonstrate_leakage: bool = False
    n_boot: int = 1000
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> dict:
        pipelines = []
        for spec in self.pipelines:
            d = spec.to_dict()
            d.pop("seed")
            pipelines.append(d)
        out = {
            "schema_version": settings.SCHEMA_VERSION,
            "seed": self.seed,
            "pipelines": pipelines,
            "permutation": self.permutation.to_dict(),
            "outputs": self.outputs.to_dict(),
            "demonstrate_leakage": self.demonstrate_leakage,
            "n_boot": self.n_boot,
        }
        if self.data is not None:
            out["data"] = self.data.to_dict()
        else:
            scenario = self.scenario.to_dict()
            scenario.pop("seed")
            out["scenario"] = scenario
        return out

    def with_seed(self, seed: int) -> "RunConfig":
        """Config with every seed (pipelines and scenario) replaced."""
        return parse_config({**self.to_dict(), "seed": seed}, self.base_dir)

    def load_data(self) -> Dataset:
        if self.data is None:
            return build_scenario(self.scenario).dataset
        path = Path(self.data.path)
        if not path.is_absolute():
            path = self.base_dir / path
        return load_dataset(path, list(self.data.y_cols), self.data.group_col, self.data.time_col)


# Field helpers
def _check_keys(obj, allowed: set, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'", path)
    return obj


def _typed(obj: dict, key: str, kinds, path: str, default=None):
    value = obj.get(key, default)
    if value is None:
        return value
    # bool is an int subclass; only accept it where bool is asked for
    if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"expected {_kind_name(kinds)}, got a boolean", f"{path}.{key}")
    if not isinstance(value, kinds):
        raise ConfigError(f"expected {_kind_name(kinds)}, got {type(value).__name__}", f"{path}.{key}")
    return value


def _kind_name(kinds) -> str:
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    return " or ".join(k.__name__ for k in kinds)


def _nested(path: str, build):
    """Run a constructor, re-rooting any ConfigError field at path."""
    try:
        return build()
    except ConfigError as e:
        field_name = e.field.split(".", 1)[1] if e.field and "." in e.field else None
        raise ConfigError(e.detail, f"{path}.{field_name}" if field_name else path) from None


def _preproc_chain(raw, path: str) -> tuple[PreprocSpec, ...]:
    if isinstance(raw, (str, dict)):
        raw = [raw]
    if not isinstance(raw, list):
        raise ConfigError("expected a list of preprocessing steps", path)
    chain = []
    for i, step in enumerate(raw):
        step_path = f"{path}[{i}]"
        if isinstance(step, str):
            step = {"kind": step}
        _check_keys(step, {"kind", "intervals"}, step_path)
        intervals = _typed(step, "intervals", list, step_path)
        chain.append(_nested(step_path, lambda: PreprocSpec(
            _typed(step, "kind", str, step_path, "mean_center"),
            None if intervals is None else tuple(intervals),
        )))
    return tuple(chain)


def _policy(raw, path: str) -> SplitPolicy:
    if raw is None:
        return SplitPolicy()
    _check_keys(raw, {"kind", "n_folds", "gap", "strat_labels_source"}, path)
    return _nested(path, lambda: SplitPolicy(
        kind=_typed(raw, "kind", str, path, "random"),
        n_folds=_typed(raw, "n_folds", int, path),
        gap=_typed(raw, "gap", int, path, 0),
        strat_labels_source=_typed(raw, "strat_labels_source", int, path, 0),
    ))


def _metric(raw, path: str) -> MetricSpec | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = {"name": raw}
    _check_keys(raw, {"name", "orientation", "params", "positive_class"}, path)
    name = _typed(raw, "name", str, path)
    if name is None:
        raise ConfigError("missing", f"{path}.name")
    return _nested(path, lambda: MetricSpec(
        name=name,
        orientation=_typed(raw, "orientation", str, path, ""),
        params=_typed(raw, "params", dict, path, {}),
        positive_class=_typed(raw, "positive_class", (int, float), path),
    ))


def _selection_grid(raw: dict, path: str) -> tuple[SelectionSpec, ...]:
    keep_k_grid = _typed(raw, "keep_k_grid", list, path)
    grid = _typed(raw, "selection_grid", list, path)
    if keep_k_grid is not None and grid is not None:
        raise ConfigError("give selection_grid or keep_k_grid, not both", f"{path}.keep_k_grid")
    if keep_k_grid is not None:
        grid = [{"method": "sparse", "keep_k": k} for k in keep_k_grid]
    if grid is None:
        grid = [{"method": "sparse", "keep_k": 10}] if str(raw.get("model", "")).startswith("sparse") else [{}]
    specs = []
    for i, entry in enumerate(grid):
        entry_path = f"{path}.selection_grid[{i}]"
        if isinstance(entry, str):
            entry = {"method": entry}
        _check_keys(entry, {"method", "threshold", "keep_k"}, entry_path)
        specs.append(_nested(entry_path, lambda: SelectionSpec(
            method=_typed(entry, "method", str, entry_path, "none"),
            threshold=_typed(entry, "threshold", (int, float), entry_path),
            keep_k=_typed(entry, "keep_k", int, entry_path),
        )))
    return tuple(specs)


def _pipeline(raw, path: str, seed: int, demonstrate_leakage: bool) -> PipelineSpec:
    _check_keys(raw, PIPELINE_KEYS, path)
    leaky = _typed(raw, "leaky", bool, path, False)
    if leaky and not demonstrate_leakage:
        raise ConfigError("leaky selection needs top-level demonstrate_leakage: true", f"{path}.leaky")
    n_lv_grid = _typed(raw, "n_lv_grid", list, path, [0, 1, 2, 3, 4, 5])
    if not all(isinstance(a, int) and not isinstance(a, bool) for a in n_lv_grid):
        raise ConfigError("entries must be integers", f"{path}.n_lv_grid")
    x_preproc = _preproc_chain(raw.get("x_preproc", ["mean_center"]), f"{path}.x_preproc")
    y_preproc = _preproc_chain(raw.get("y_preproc", ["mean_center"]), f"{path}.y_preproc")
    selection_grid = _selection_grid(raw, path)
    inner = _policy(raw.get("inner_policy"), f"{path}.inner_policy")
    outer = _policy(raw.get("outer_policy"), f"{path}.outer_policy")
    metric = _metric(raw.get("metric"), f"{path}.metric")
    return _nested(path, lambda: PipelineSpec(
        name=_typed(raw, "name", str, path, "pls"),
        model=_typed(raw, "model", str, path, "pls"),
        x_preproc=x_preproc,
        y_preproc=y_preproc,
        selection_grid=selection_grid,
        n_lv_grid=tuple(n_lv_grid),
        inner_policy=inner,
        outer_policy=outer,
        metric=metric,
        n_repetitions=_typed(raw, "n_repetitions", int, path, 1),
        seed=seed,
        leaky=leaky,
        disclosure=_typed(raw, "disclosure", str, path, settings.DEFAULT_DISCLOSURE),
        selection_rule=_typed(raw, "selection_rule", str, path, "best"),
    ))


def parse_config(raw, base_dir=Path(".")) -> RunConfig:
    """Validate a raw JSON object into a RunConfig."""
    _check_keys(raw, TOP_LEVEL_KEYS, "config")
    version = raw.get("schema_version")
    if version != settings.SCHEMA_VERSION:
        raise ConfigError(f"expected {settings.SCHEMA_VERSION}, got {version!r}", "schema_version")
    seed = _typed(raw, "seed", int, "config", 0)
    if seed < 0:
        raise ConfigError("must be non-negative", "seed")
    if ("data" in raw) == ("scenario" in raw):
        raise ConfigError("exactly one of 'data' or 'scenario' is required", "data/scenario")
    demonstrate_leakage = _typed(raw, "demonstrate_leakage", bool, "config", False)

    data = scenario = None
    if "data" in raw:
        d = _check_keys(raw["data"], DATA_KEYS, "data")
        path = _typed(d, "path", str, "data")
        if not path:
            raise ConfigError("missing", "data.path")
        y_cols = d.get("y_cols", [])
        y_cols = [y_cols] if isinstance(y_cols, (str, int)) else y_cols
        if not isinstance(y_cols, list) or not y_cols:
            raise ConfigError("at least one Y column is required", "data.y_cols")
        data = DataSource(path, tuple(y_cols), _typed(d, "group_col", (str, int), "data"),
                          _typed(d, "time_col", (str, int), "data"))
    else:
        s = _check_keys(raw["scenario"], {"name", "params"}, "scenario")
        scenario = _nested("scenario", lambda: ScenarioSpec(
            name=_typed(s, "name", str, "scenario", ""),
            params=_typed(s, "params", dict, "scenario", {}),
            seed=seed,
        ))

    pipelines_raw = raw.get("pipelines")
    if not isinstance(pipelines_raw, list) or not pipelines_raw:
        raise ConfigError("at least one pipeline is required", "pipelines")
    pipelines = tuple(_pipeline(p, f"pipelines[{i}]", seed, demonstrate_leakage)
                      for i, p in enumerate(pipelines_raw))
    names = [p.name for p in pipelines]
    if len(set(names)) != len(names):
        raise ConfigError("pipeline names must be unique", "pipelines")

    perm_raw = _check_keys(raw.get("permutation", {}), PERMUTATION_KEYS, "permutation")
    permutation = PermutationSettings(
        enabled=_typed(perm_raw, "enabled", bool, "permutation", False),
        n_perm=_typed(perm_raw, "n_perm", int, "permutation", 99),
        block=_typed(perm_raw, "block", str, "permutation", "Y"),
    )
    if permutation.n_perm < 1:
        raise ConfigError("must be at least 1", "permutation.n_perm")
    if permutation.block not in ("Y", "X"):
        raise ConfigError("must be 'Y' or 'X'", "permutation.block")

    out_raw = _check_keys(raw.get("outputs", {}), OUTPUT_KEYS, "outputs")
    outputs = OutputSettings(
        report_path=_typed(out_raw, "report_path", str, "outputs", "report.json"),
        curves_dir=_typed(out_raw, "curves_dir", str, "outputs", "curves"),
    )
    n_boot = _typed(raw, "n_boot", int, "config", 1000)
    if n_boot < 1:
        raise ConfigError("must be at least 1", "n_boot")
    return RunConfig(
        pipelines=pipelines,
        data=data,
        scenario=scenario,
        seed=seed,
        permutation=permutation,
        outputs=outputs,
        demonstrate_leakage=demonstrate_leakage,
        n_boot=n_boot,
        base_dir=Path(base_dir),
    )


def normalize_config(raw) -> dict:
    """The canonical form of a config: every default filled in."""
    return parse_config(raw).to_dict()


def read_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}", "--config")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", "--config")
    except UnicodeDecodeError as e:
        raise DataError(f"{path} is not UTF-8 text ({e})")
    return parse_config(raw, path.parent)
