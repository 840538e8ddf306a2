"""
# Reporting - validation reports, paired comparisons and plot-ready tables
# Report JSON is deterministic: keys sorted, timings kept apart unless asked for
"""

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from valguard import settings
from valguard.errors import DataError


@dataclass
class RepetitionResult:
    index: int
    value: float
    fold_values: list[float | None]
    chosen: list[dict]
    seconds: float
    curve: dict[int, float]
    flags: list[str] = field(default_factory=list)
    fallbacks: int = 0
    predictions: dict | None = None

    def to_dict(self, timings: bool = True) -> dict:
        return {
            "index": self.index,
            "value": self.value,
            "fold_values": self.fold_values,
            "chosen": self.chosen,
            "seconds": self.seconds if timings else None,
            "curve": [[int(a), v] for a, v in sorted(self.curve.items())],
            "flags": self.flags,
            "fallbacks": self.fallbacks,
            "predictions": self.predictions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepetitionResult":
        return cls(
            index=d["index"],
            value=d["value"],
            fold_values=d["fold_values"],
            chosen=d["chosen"],
            seconds=d["seconds"] or 0.0,
            curve={int(a): v for a, v in d["curve"]},
            flags=d.get("flags", []),
            fallbacks=d.get("fallbacks", 0),
            predictions=d.get("predictions"),
        )


@dataclass
class ValidationReport:
    pipeline_name: str
    pipeline: dict
    metric: dict
    seed: int
    n_repetitions: int
    per_repetition: list[RepetitionResult]
    summary: dict
    baseline_zero_lv: float | None = None
    baseline_naive_class: float | None = None
    null_distribution: list[float] | None = None
    p_value_vs_null: float | None = None
    permute_block: str | None = None
    independence_disclosure: str = settings.DEFAULT_DISCLOSURE
    selection_fallbacks: int = 0
    flags: list[str] = field(default_factory=list)
    watermark: str | None = None
    bootstrap: dict | None = None
    bootstrap_observations: dict | None = None
    caveats: list[str] = field(default_factory=list)
    schema_version: int = settings.SCHEMA_VERSION

    @property
    def values(self) -> np.ndarray:
        return np.array([rep.value for rep in self.per_repetition], dtype=float)

    @property
    def total_seconds(self) -> float:
        return float(sum(rep.seconds for rep in self.per_repetition))

    @property
    def cv_curves(self) -> list[dict[int, float]]:
        return [rep.curve for rep in self.per_repetition]

    def attach_null(self, result) -> "ValidationReport":
        self.null_distribution = list(result.null_distribution)
        self.p_value_vs_null = result.p_value
        self.permute_block = result.block
        return self

    def to_dict(self, timings: bool = True) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "per_repetition"}
        out["per_repetition"] = [rep.to_dict(timings) for rep in self.per_repetition]
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def write(self, out_dir, stem: str = "report") -> Path:
        """report.json without timings plus a timings JSON beside it."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{stem}.json"
        path.write_text(self.to_json(timings=False), encoding="utf-8")
        timings = {"pipeline_name": self.pipeline_name,
                   "seconds": [rep.seconds for rep in self.per_repetition],
                   "total_seconds": self.total_seconds}
        (out_dir / f"{stem}_timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        validate_report_dict(d)
        fields = {k: v for k, v in d.items() if k != "per_repetition"}
        return cls(per_repetition=[RepetitionResult.from_dict(r) for r in d["per_repetition"]], **fields)


@dataclass
class ComparisonResult:
    model_names: tuple[str, str]
    metric: str
    per_repetition_diffs: list[float]
    p_value: float
    test_method: str
    medians: tuple[float, float]
    iqrs: tuple[float, float]
    timings_seconds: tuple[float, float]
    caveats: list[str] = field(default_factory=list)
    watermark: str | None = None

    def to_dict(self, timings: bool = True) -> dict:
        out = asdict(self)
        for key in ("model_names", "medians", "iqrs", "timings_seconds"):
            out[key] = list(out[key])
        if not timings:
            out["timings_seconds"] = None
        return out


# Structural schema check
_REQUIRED = {
    "schema_version": int,
    "pipeline_name": str,
    "pipeline": dict,
    "metric": dict,
    "seed": int,
    "n_repetitions": int,
    "per_repetition": list,
    "summary": dict,
    "independence_disclosure": str,
    "selection_fallbacks": int,
    "flags": list,
    "caveats": list,
}
_NULLABLE = {
    "baseline_zero_lv": (int, float),
    "baseline_naive_class": (int, float),
    "null_distribution": list,
    "p_value_vs_null": (int, float),
    "permute_block": str,
    "watermark": str,
    "bootstrap": dict,
    "bootstrap_observations": dict,
}


def validate_report_dict(d: dict) -> None:
    """Check a report dict against the published layout; raises DataError naming the field."""
    if not isinstance(d, dict):
        raise DataError("report: expected a JSON object")
    unknown = set(d) - set(_REQUIRED) - set(_NULLABLE)
    if unknown:
        raise DataError(f"report: unknown field '{sorted(unknown)[0]}'")
    for key, kind in _REQUIRED.items():
        if key not in d:
            raise DataError(f"report.{key}: missing")
        if not isinstance(d[key], kind) or isinstance(d[key], bool):
            raise DataError(f"report.{key}: expected {kind.__name__}")
    for key, kind in _NULLABLE.items():
        if d.get(key) is not None and not isinstance(d[key], kind):
            raise DataError(f"report.{key}: wrong type")
    if d["schema_version"] != settings.SCHEMA_VERSION:
        raise DataError(f"report.schema_version: {d['schema_version']} is not {settings.SCHEMA_VERSION}")
    if len(d["per_repetition"]) != d["n_repetitions"]:
        raise DataError("report.per_repetition: length differs from n_repetitions")
    for stat in ("mean", "sd", "median", "iqr"):
        if stat not in d["summary"]:
            raise DataError(f"report.summary.{stat}: missing")
    p = d.get("p_value_vs_null")
    if p is not None and not 0 < p <= 1:
        raise DataError("report.p_value_vs_null: outside (0, 1]")
    if d["metric"].get("name") is None:
        raise DataError("report.metric.name: missing")


def read_report(path) -> ValidationReport:
    path = Path(path)
    try:
        return ValidationReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})")


# Plot-ready tables
@dataclass
class PlotData:
    name: str
    frame: pd.DataFrame

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.name}.csv"
        self.frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "pipeline"


def watermarked(frame: pd.DataFrame, marks: list[str | None]) -> pd.DataFrame:
    """Tag rows from leaky runs; tables without any leaky row stay as they are."""
    if any(marks):
        frame["watermark"] = [m or "" for m in marks]
    return frame


def cv_curve_data(report: ValidationReport) -> PlotData:
    """Inner-loop metric versus n_lv, first outer fold of every repetition."""
    rows = [(rep.index, a, v) for rep in report.per_repetition for a, v in sorted(rep.curve.items())]
    frame = pd.DataFrame(rows, columns=["repetition", "n_lv", report.metric["name"]])
    return PlotData(f"cv_curve_{slug(report.pipeline_name)}", watermarked(frame, [report.watermark] * len(rows)))


def boxplot_data(reports: list[ValidationReport], name: str = "boxplot") -> PlotData:
    rows = [(r.pipeline_name, rep.index, rep.value) for r in reports for rep in r.per_repetition]
    marks = [r.watermark for r in reports for _ in r.per_repetition]
    metric = reports[0].metric["name"] if reports else "value"
    return PlotData(name, watermarked(pd.DataFrame(rows, columns=["pipeline", "repetition", metric]), marks))


def null_histogram_data(report: ValidationReport) -> PlotData:
    if report.null_distribution is None:
        raise DataError(f"report '{report.pipeline_name}' carries no null distribution")
    frame = pd.DataFrame({"permutation": np.arange(len(report.null_distribution)),
                          report.metric["name"]: report.null_distribution})
    return PlotData(f"null_histogram_{slug(report.pipeline_name)}",
                    watermarked(frame, [report.watermark] * len(frame)))


def comparison_table(comparisons: list[ComparisonResult]) -> PlotData:
    rows = [{"pipeline_a": c.model_names[0], "pipeline_b": c.model_names[1], "metric": c.metric,
             "median_a": c.medians[0], "median_b": c.medians[1], "iqr_a": c.iqrs[0], "iqr_b": c.iqrs[1],
             "p_value": c.p_value, "test": c.test_method} for c in comparisons]
    return PlotData("comparisons", watermarked(pd.DataFrame(rows), [c.watermark for c in comparisons]))
