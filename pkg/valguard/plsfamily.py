"""
# PLS family - NIPALS PLS / PLS-DA, sparse PLS and variable importance filters
# Models are immutable; nested smaller-LV models come from truncate()
# VIP and Selectivity Ratio feed the in-loop variable selection
"""

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from valguard import settings
from valguard.dataprep import FittedPreproc, PreprocSpec, apply_chain, fit_chain, fit_preproc, invert_chain
from valguard.errors import ConfigError, DegenerateError, EmptySelectionError, ShapeError

SELECTION_METHODS = ("none", "vip", "sr", "sparse")


@dataclass(frozen=True)
class PlsModel:
    n_lv: int
    W: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    B: np.ndarray
    x_preproc: tuple[FittedPreproc, ...] = ()
    y_preproc: tuple[FittedPreproc, ...] = ()
    variables: np.ndarray | None = None
    n_raw_vars: int | None = None
    classes: np.ndarray | None = None
    iterations: tuple[int, ...] = ()
    keep_k: int | None = None

    @property
    def is_classifier(self) -> bool:
        return self.classes is not None


@dataclass(frozen=True)
class SelectionSpec:
    method: str = "none"
    threshold: float | None = None
    keep_k: int | None = None

    def __post_init__(self):
        if self.method not in SELECTION_METHODS:
            raise ConfigError(f"unknown selection method '{self.method}'", "selection.method")
        if self.method in ("vip", "sr"):
            if self.keep_k is not None:
                raise ConfigError(f"keep_k does not apply to {self.method}", "selection.keep_k")
            if self.threshold is None:
                default = settings.VIP_THRESHOLD if self.method == "vip" else settings.SR_THRESHOLD
                object.__setattr__(self, "threshold", default)
        elif self.method == "sparse":
            if self.threshold is not None:
                raise ConfigError("threshold does not apply to sparse", "selection.threshold")
            if self.keep_k is None or self.keep_k < 1:
                raise ConfigError("sparse selection needs keep_k >= 1", "selection.keep_k")
        elif self.threshold is not None or self.keep_k is not None:
            raise ConfigError("selection 'none' takes no parameters", "selection")

    @property
    def label(self) -> str:
        if self.method in ("vip", "sr"):
            return f"{self.method}>{self.threshold:g}"
        if self.method == "sparse":
            return f"sparse k={self.keep_k}"
        return "none"

    def to_dict(self) -> dict:
        out = {"method": self.method}
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.keep_k is not None:
            out["keep_k"] = self.keep_k
        return out


def _hard_threshold(w: np.ndarray, keep_k: int | None) -> np.ndarray:
    if keep_k is None or keep_k >= w.size:
        return w
    keep = np.argsort(-np.abs(w), kind="stable")[:keep_k]
    out = np.zeros_like(w)
    out[keep] = w[keep]
    return out


def _regression_coefficients(W: np.ndarray, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    if W.shape[1] == 0:
        return np.zeros((W.shape[0], Q.shape[0]))
    return W @ np.linalg.solve(P.T @ W, Q.T)


def _nipals(Xc: np.ndarray, Yc: np.ndarray, n_lv: int, keep_k: int | None) -> dict:
    n, p = Xc.shape
    m = Yc.shape[1]
    if n_lv < 0 or n_lv > min(n - 1, p):
        raise DegenerateError(f"n_lv={n_lv} too large for {n} rows and {p} variables")
    if n_lv > 0 and not np.any(Xc):
        raise DegenerateError("X is all zeros")
    X = np.array(Xc, dtype=float)
    Y = np.array(Yc, dtype=float)
    W, P, Q, T = (np.zeros((p, n_lv)), np.zeros((p, n_lv)), np.zeros((m, n_lv)), np.zeros((n, n_lv)))
    iterations = []
    for a in range(n_lv):
        u = Y[:, int(np.argmax(Y.var(axis=0)))]
        t_old = None
        for it in range(1, settings.NIPALS_MAX_ITER + 1):
            w = _hard_threshold(X.T @ u, keep_k)
            norm_w = np.linalg.norm(w)
            if norm_w == 0:
                raise DegenerateError(f"component {a + 1}: X carries no covariance with Y")
            w = w / norm_w
            t = X @ w
            tt = t @ t
            if tt == 0:
                raise DegenerateError(f"component {a + 1}: zero score vector")
            q = Y.T @ t / tt
            if m == 1:
                break
            u = Y @ q / (q @ q)
            if t_old is not None and np.linalg.norm(t - t_old) < settings.NIPALS_TOL * np.linalg.norm(t):
                break
            t_old = t
        p_a = X.T @ t / tt
        X -= np.outer(t, p_a)
        Y -= np.outer(t, q)
        W[:, a], P[:, a], Q[:, a], T[:, a] = w, p_a, q, t
        iterations.append(it)
    return {"W": W, "P": P, "Q": Q, "T": T, "B": _regression_coefficients(W, P, Q),
            "iterations": tuple(iterations)}


def _assemble(fit: dict, n_lv: int, x_preproc, y_preproc, variables, n_raw_vars, keep_k, classes=None) -> PlsModel:
    p = fit["W"].shape[0]
    variables = np.arange(p) if variables is None else np.asarray(variables, dtype=int)
    if variables.size != p:
        raise ShapeError(f"{variables.size} variable indices for {p} model columns")
    return PlsModel(
        n_lv=n_lv,
        x_preproc=tuple(x_preproc),
        y_preproc=tuple(y_preproc),
        variables=variables,
        n_raw_vars=p if n_raw_vars is None else n_raw_vars,
        keep_k=keep_k,
        classes=classes,
        **fit,
    )


def fit_pls(Xc, Yc, n_lv: int, *, x_preproc=(), y_preproc=(), variables=None, n_raw_vars=None) -> PlsModel:
    """Dense NIPALS PLS on preprocessed blocks.

    Preprocessing chains and the raw-column subset are stored so that
    predict() accepts raw rows; with none given the model works in the
    preprocessed space directly.
    """
    Xc, Yc = np.asarray(Xc, dtype=float), np.asarray(Yc, dtype=float).reshape(len(Xc), -1)
    fit = _nipals(Xc, Yc, n_lv, None)
    return _assemble(fit, n_lv, x_preproc, y_preproc, variables, n_raw_vars, None)


def fit_sparse_pls(Xc, Yc, n_lv: int, keep_k: int, *, x_preproc=(), y_preproc=(), variables=None,
                   n_raw_vars=None) -> PlsModel:
    """NIPALS with the keep_k largest |w| entries retained per component."""
    Xc, Yc = np.asarray(Xc, dtype=float), np.asarray(Yc, dtype=float).reshape(len(Xc), -1)
    if not 1 <= keep_k <= Xc.shape[1]:
        raise ConfigError(f"keep_k={keep_k} outside 1..{Xc.shape[1]}", "selection.keep_k")
    fit = _nipals(Xc, Yc, n_lv, keep_k)
    return _assemble(fit, n_lv, x_preproc, y_preproc, variables, n_raw_vars, keep_k)


def encode_classes(class_labels) -> tuple[np.ndarray, np.ndarray]:
    """One-hot dummy block (one column per class, even for two classes)."""
    labels = np.asarray(class_labels).ravel()
    classes = np.unique(labels)
    if classes.size < 2:
        raise DegenerateError(f"PLS-DA needs at least 2 classes, got {classes.size}")
    dummy = (labels[:, None] == classes[None, :]).astype(float)
    return dummy, classes


def fit_plsda(Xc, class_labels, n_lv: int, *, keep_k: int | None = None, x_preproc=(), variables=None,
              n_raw_vars=None) -> PlsModel:
    Xc = np.asarray(Xc, dtype=float)
    dummy, classes = encode_classes(class_labels)
    y_fp = fit_preproc(PreprocSpec("mean_center"), dummy)
    Yc = dummy - y_fp.means
    fit = _nipals(Xc, Yc, n_lv, keep_k)
    return _assemble(fit, n_lv, x_preproc, (y_fp,), variables, n_raw_vars, keep_k, classes)


def fit_sparse_plsda(Xc, class_labels, n_lv: int, keep_k: int, **kwargs) -> PlsModel:
    Xc = np.asarray(Xc, dtype=float)
    if not 1 <= keep_k <= Xc.shape[1]:
        raise ConfigError(f"keep_k={keep_k} outside 1..{Xc.shape[1]}", "selection.keep_k")
    return fit_plsda(Xc, class_labels, n_lv, keep_k=keep_k, **kwargs)


def truncate(m: PlsModel, n_lv: int) -> PlsModel:
    """The nested model built from the first n_lv components of m."""
    if not 0 <= n_lv <= m.n_lv:
        raise ConfigError(f"cannot truncate a {m.n_lv}-LV model to {n_lv}", "n_lv")
    if n_lv == m.n_lv:
        return m
    W, P, Q = m.W[:, :n_lv], m.P[:, :n_lv], m.Q[:, :n_lv]
    return replace(m, n_lv=n_lv, W=W, P=P, Q=Q, T=m.T[:, :n_lv], B=_regression_coefficients(W, P, Q),
                   iterations=m.iterations[:n_lv])


def model_inputs(m: PlsModel, X_raw: np.ndarray) -> np.ndarray:
    """Raw rows → preprocessed model columns."""
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim != 2 or X_raw.shape[1] != m.n_raw_vars:
        raise ShapeError(f"model expects {m.n_raw_vars} raw columns, got {np.shape(X_raw)}")
    return apply_chain(m.x_preproc, X_raw)[:, m.variables]


def predict(m: PlsModel, X_new_raw) -> np.ndarray:
    """Predicted Y in original units (dummy block for PLS-DA)."""
    return invert_chain(m.y_preproc, model_inputs(m, X_new_raw) @ m.B)


def classes_from_dummy(dummy_pred: np.ndarray, classes: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lower class index on ties
    return classes[np.argmax(dummy_pred, axis=1)]


def predict_class(m: PlsModel, X_new_raw) -> np.ndarray:
    if not m.is_classifier:
        raise ConfigError("predict_class needs a PLS-DA model", "model")
    return classes_from_dummy(predict(m, X_new_raw), m.classes)


def class_scores(m: PlsModel, X_new_raw, positive_class) -> np.ndarray:
    """Predicted dummy value of the positive class, used as a ranking score."""
    if not m.is_classifier:
        raise ConfigError("class_scores needs a PLS-DA model", "model")
    hits = np.flatnonzero(m.classes == positive_class)
    if hits.size == 0:
        raise ConfigError(f"positive class {positive_class} not among {m.classes.tolist()}", "metric.positive_class")
    return predict(m, X_new_raw)[:, hits[0]]


# Variable importance
def vip_scores(m: PlsModel) -> np.ndarray:
    if m.n_lv < 1:
        raise DegenerateError("VIP needs a model with at least one LV")
    ssy = np.sum(m.Q ** 2, axis=0) * np.sum(m.T ** 2, axis=0)
    total = ssy.sum()
    if total <= 0:
        raise DegenerateError("VIP undefined: the model explains no Y variance")
    w_norm = m.W / np.linalg.norm(m.W, axis=0)
    p = m.W.shape[0]
    return np.sqrt(p * (w_norm ** 2 @ ssy) / total)


def _sr_column(Xc: np.ndarray, b: np.ndarray) -> np.ndarray:
    norm_b = np.linalg.norm(b)
    if norm_b == 0:
        raise DegenerateError("selectivity ratio undefined: zero coefficient vector")
    t = Xc @ (b / norm_b)
    tt = t @ t
    if tt == 0:
        raise DegenerateError("selectivity ratio undefined: zero target-projection scores")
    p_tp = Xc.T @ t / tt
    explained = p_tp ** 2 * tt
    residual = np.sum((Xc - np.outer(t, p_tp)) ** 2, axis=0)
    total = np.sum(Xc ** 2, axis=0)
    sr = np.zeros_like(explained)
    singular = residual <= 1e-20 * np.maximum(total, np.finfo(float).tiny)
    regular = ~singular
    sr[regular] = explained[regular] / residual[regular]
    sr[singular & (explained > 0)] = np.inf
    return sr


def sr_scores(m: PlsModel, Xc, column: int | None = None) -> np.ndarray:
    """Selectivity Ratio per model variable; +inf marks a zero residual.

    Xc is the preprocessed build block restricted to the model's variables.
    With several Y columns and no column given, per-column ratios are averaged.
    """
    Xc = np.asarray(Xc, dtype=float)
    if Xc.shape[1] != m.B.shape[0]:
        raise ShapeError(f"SR needs {m.B.shape[0]} model columns, got {Xc.shape[1]}")
    if column is not None:
        return _sr_column(Xc, m.B[:, column])
    return np.mean([_sr_column(Xc, m.B[:, j]) for j in range(m.B.shape[1])], axis=0)


def apply_selection(spec: SelectionSpec, Xc_build, m: PlsModel) -> np.ndarray:
    """Raw column indices kept by the selection filter."""
    if spec.method == "none":
        return m.variables.copy()
    if spec.method == "sparse":
        keep = np.any(m.W != 0, axis=1)
    elif spec.method == "vip":
        keep = vip_scores(m) > spec.threshold
    else:
        keep = sr_scores(m, Xc_build) > spec.threshold
    if not keep.any():
        raise EmptySelectionError(f"{spec.label} kept no variable")
    return m.variables[keep]


def fit_pipeline_model(
    X_raw,
    Y_raw,
    n_lv: int,
    *,
    x_specs: Sequence[PreprocSpec] = (PreprocSpec("mean_center"),),
    y_specs: Sequence[PreprocSpec] = (PreprocSpec("mean_center"),),
    variables=None,
    keep_k: int | None = None,
    classifier: bool = False,
) -> PlsModel:
    """Fit preprocessing and model on raw build rows in one call."""
    X_raw = np.asarray(X_raw, dtype=float)
    x_chain = fit_chain(x_specs, X_raw)
    Xp = apply_chain(x_chain, X_raw)
    variables = np.arange(X_raw.shape[1]) if variables is None else np.asarray(variables, dtype=int)
    Xm = Xp[:, variables]
    common = {"x_preproc": x_chain, "variables": variables, "n_raw_vars": X_raw.shape[1]}
    if classifier:
        return fit_plsda(Xm, np.asarray(Y_raw).ravel(), n_lv, keep_k=keep_k, **common)
    Y_raw = np.asarray(Y_raw, dtype=float).reshape(X_raw.shape[0], -1)
    y_chain = fit_chain(y_specs, Y_raw)
    Yp = apply_chain(y_chain, Y_raw)
    if keep_k is not None:
        return fit_sparse_pls(Xm, Yp, n_lv, keep_k, y_preproc=y_chain, **common)
    return fit_pls(Xm, Yp, n_lv, y_preproc=y_chain, **common)


def model_to_dict(m: PlsModel) -> dict:
    """Audit export of parameters and preprocessing."""
    return {
        "n_lv": m.n_lv,
        "W": m.W.tolist(),
        "P": m.P.tolist(),
        "Q": m.Q.tolist(),
        "B": m.B.tolist(),
        "variables": m.variables.tolist(),
        "n_raw_vars": m.n_raw_vars,
        "keep_k": m.keep_k,
        "classes": None if m.classes is None else m.classes.tolist(),
        "iterations": list(m.iterations),
        "x_preproc": [fp.to_dict() for fp in m.x_preproc],
        "y_preproc": [fp.to_dict() for fp in m.y_preproc],
    }
