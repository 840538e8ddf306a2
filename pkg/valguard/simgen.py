"""
# Simgen - seeded generators for the simulated experiments and null examples
# Every generator is a pure function of its parameters and RngStream
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from valguard import console, settings
from valguard.core import Dataset, RngStream, column_means, column_sds
from valguard.dataprep import SplitPolicy
from valguard.engine import PipelineSpec, double_cv
from valguard.errors import ConfigError

SCENARIOS = ("fig1_roc", "fig23_nmc_wmc", "fig4_pls_null", "fig5_highdim_null", "fig6_informative")

_DEFAULTS = {
    "fig1_roc": {"n": 1000, "minority_fraction": 0.3, "discriminability": settings.DEFAULT_DPRIME},
    "fig23_nmc_wmc": {"n": 1000, "minority_fraction": 0.01, "discriminability": settings.DEFAULT_DPRIME},
    "fig4_pls_null": {"n": 20, "p": 10},
    "fig5_highdim_null": {"n": 20, "p": 1000},
    "fig6_informative": {"n": 20, "p": 100, "y_cols": 2, "n_informative": 10,
                         "noise_sd": settings.FIG6_NOISE_SD},
}
_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario '{self.name}' (choose from {', '.join(SCENARIOS)})",
                              "scenario.name")
        defaults = _DEFAULTS[self.name]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown parameter '{sorted(unknown)[0]}' for {self.name}", "scenario.params")
        params = {**defaults, **self.params}
        for key in ("n", "p", "y_cols", "n_informative"):
            if key in params and (int(params[key]) != params[key] or params[key] < 1):
                raise ConfigError(f"{key} must be a positive integer", f"scenario.params.{key}")
        if "minority_fraction" in params and not 0 < params["minority_fraction"] < 0.5:
            raise ConfigError("minority_fraction must lie in (0, 0.5)", "scenario.params.minority_fraction")
        if params.get("noise_sd", 0) < 0:
            raise ConfigError("noise_sd must be non-negative", "scenario.params.noise_sd")
        if params.get("n_informative", 0) > params.get("p", np.inf):
            raise ConfigError("n_informative exceeds p", "scenario.params.n_informative")
        object.__setattr__(self, "params", params)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "seed": self.seed}


@dataclass(frozen=True)
class Scenario:
    dataset: Dataset
    informative: np.ndarray | None = None


def gen_classifier_scores(n: int, minority_fraction: float, discriminability: float, rng: RngStream,
                          slope: float = settings.SCORE_SLOPE, center: float | None = None):
    """Labels (1 = minority) and scores in (0, 1) from a class-conditional Gaussian classifier.

    Latent scores are N(0, 1) for negatives and N(d', 1) for positives; the emitted
    score is logistic(slope * (s - center)), center defaulting to d'/2.
    slope=1, center=0 gives plain logistic(s).
    """
    if not 0 < minority_fraction < 0.5:
        raise ConfigError("minority_fraction must lie in (0, 0.5)", "minority_fraction")
    if n * minority_fraction < 1:
        raise ConfigError(f"n={n} with minority_fraction={minority_fraction} expects no minority row", "n")
    if slope <= 0:
        raise ConfigError("slope must be positive", "slope")
    gen = rng.generator()
    for _ in range(_MAX_REDRAWS):
        labels = (gen.random(n) < minority_fraction).astype(float)
        if 0 < labels.sum() < n:
            break
    else:
        raise ConfigError(f"could not draw both classes in {_MAX_REDRAWS} attempts", "minority_fraction")
    latent = gen.standard_normal(n) + discriminability * labels
    if center is None:
        center = discriminability / 2
    return labels, expit(slope * (latent - center))


def _null_blocks(rng: RngStream, n: int, p: int) -> Dataset:
    X = rng.spawn(0).generator().standard_normal((n, p))
    y = rng.spawn(1).generator().standard_normal((n, 1))
    return Dataset(X=X, Y=y)


def gen_fig4(rng: RngStream, n: int = 20, p: int = 10) -> Dataset:
    """Unrelated X (n x p) and y (n x 1)."""
    return _null_blocks(rng, n, p)


def gen_fig5(rng: RngStream, n: int = 20, p: int = 1000) -> Dataset:
    """High-dimensional null: far more variables than rows, none related to y."""
    return _null_blocks(rng, n, p)


def gen_fig6(rng: RngStream, n: int = 20, p: int = 100, y_cols: int = 2, n_informative: int = 10,
             noise_sd: float = settings.FIG6_NOISE_SD) -> tuple[Dataset, np.ndarray]:
    """Y = X_I B + noise for a random informative subset I; returns the dataset and sorted I."""
    if n_informative > p:
        raise ConfigError(f"n_informative={n_informative} exceeds p={p}", "n_informative")
    if noise_sd < 0:
        raise ConfigError("noise_sd must be non-negative", "noise_sd")
    X = rng.spawn(0).generator().standard_normal((n, p))
    informative = np.sort(rng.spawn(1).generator().choice(p, size=n_informative, replace=False))
    B = rng.spawn(2).generator().standard_normal((n_informative, y_cols))
    noise = rng.spawn(3).generator().standard_normal((n, y_cols)) * noise_sd
    Y = X[:, informative] @ B + noise
    return Dataset(X=X, Y=Y), informative


def make_null_example(ds: Dataset, mode: str, rng: RngStream) -> Dataset:
    """A dataset shaped like ds with the X-Y link destroyed."""
    gen = rng.generator()
    if mode == "permute_y":
        return ds.with_y(ds.require_y()[gen.permutation(ds.n_rows)])
    if mode == "synth_gaussian":
        means = column_means(ds.X)
        sds = column_sds(ds.X)
        return ds.with_x(means + gen.standard_normal(ds.X.shape) * sds)
    raise ConfigError(f"unknown null mode '{mode}' (permute_y or synth_gaussian)", "mode")


def build_scenario(spec: ScenarioSpec) -> Scenario:
    """Dataset for a named scenario; classifier scenarios give X = scores, Y = labels."""
    rng = RngStream(spec.seed)
    params = spec.params
    if spec.name in ("fig1_roc", "fig23_nmc_wmc"):
        labels, scores = gen_classifier_scores(int(params["n"]), params["minority_fraction"],
                                               params["discriminability"], rng)
        return Scenario(Dataset(X=scores[:, None], Y=labels[:, None], variable_names=("score",)))
    if spec.name == "fig4_pls_null":
        return Scenario(gen_fig4(rng, int(params["n"]), int(params["p"])))
    if spec.name == "fig5_highdim_null":
        return Scenario(gen_fig5(rng, int(params["n"]), int(params["p"])))
    ds, informative = gen_fig6(rng, int(params["n"]), int(params["p"]), int(params["y_cols"]),
                               int(params["n_informative"]), float(params["noise_sd"]))
    return Scenario(ds, informative)


def calibrate_fig6_noise(noise_grid=(0.5, 1.0, 2.0, 4.0), seeds=range(5), target: float = 0.7,
                         threads: int = 1) -> tuple[float, dict[float, float]]:
    """Dense-PLS double-CV sweep over noise levels; returns the level whose median Q2 is nearest target."""
    medians = {}
    for noise_sd in noise_grid:
        q2 = []
        for seed in seeds:
            ds, _ = gen_fig6(RngStream(seed), noise_sd=noise_sd)
            spec = PipelineSpec(name="PLS", n_lv_grid=tuple(range(6)), outer_policy=SplitPolicy(n_folds=5),
                                inner_policy=SplitPolicy(n_folds=5), seed=seed)
            q2.append(double_cv(ds, spec, threads).summary["median"])
        medians[float(noise_sd)] = float(np.median(q2))
        console.step(f"   noise_sd={noise_sd:g}: median Q2 = {medians[float(noise_sd)]:.3f}")
    best = min(medians, key=lambda s: (abs(medians[s] - target), s))
    return best, medians
