"""Score labels, regression rankers and the leave-one-instance-out protocol."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .features import FEATURE_NAMES, RC_FEATURES

RIDGE_ALPHA = 0.01
LASSO_ALPHA = 0.001
KNN_K = 5
MODEL_KINDS = ("ridge", "lasso", "knn", "voting", "rc_ridge", "rc_lasso")


def min_max_normalize(values) -> np.ndarray:
    """Rescale to [0, 1]; a constant input maps to all zeros."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot normalise an empty list")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


@dataclass
class FeatureScaler:
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, X) -> "FeatureScaler":
        X = np.asarray(X, dtype=float)
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.mins) / safe, 0.0)


# -- labelled data -----------------------------------------------------------


@dataclass
class LabeledDataset:
    instance_ids: list
    keys: list
    X: np.ndarray
    gap: np.ndarray
    time: np.ndarray
    g: np.ndarray
    t: np.ndarray
    score: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.keys)

    def instances(self) -> list:
        return sorted(set(self.instance_ids))

    def rows_of(self, instance_id) -> np.ndarray:
        return np.array([i for i, iid in enumerate(self.instance_ids) if iid == instance_id], dtype=int)

    def columns(self, names) -> np.ndarray:
        idx = [self.feature_names.index(n) for n in names]
        return self.X[:, idx]

    def to_csv(self, path) -> None:
        header = ["instance", "key", *self.feature_names, "gap_pct", "solve_time", "g", "t", "score"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for r in range(len(self)):
                vals = [self.instance_ids[r], self.keys[r]]
                vals += [repr(float(v)) for v in self.X[r]]
                vals += [repr(float(v)) for v in (self.gap[r], self.time[r], self.g[r], self.t[r], self.score[r])]
                fh.write(",".join(_csv_cell(v) for v in vals) + "\n")


def _csv_cell(v: str) -> str:
    return f'"{v}"' if "," in v else v


def _finite_fill(values: np.ndarray) -> np.ndarray:
    # unbounded gaps rank behind every finite one
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if finite.all():
        return v
    fill = v[finite].max() if finite.any() else 0.0
    return np.where(finite, v, fill)


def label_dataset(rows, feature_names=FEATURE_NAMES) -> LabeledDataset:
    """Per-instance min-max labels from ``(instance_id, key, features, gap, time)`` rows.

    ``score = 0.5 g + 0.5 t`` where ``g`` and ``t`` are the gap and solve
    time rescaled within the instance. Infinite gaps are replaced by the
    instance's largest finite gap before rescaling.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to label")
    ids = [r[0] for r in rows]
    keys = [r[1] for r in rows]
    X = np.array([np.asarray(r[2], dtype=float) for r in rows])
    gap = np.array([float(r[3]) for r in rows])
    tim = np.array([float(r[4]) for r in rows])
    g = np.zeros(len(rows))
    t = np.zeros(len(rows))
    meta = {}
    for iid in sorted(set(ids)):
        idx = np.array([i for i, x in enumerate(ids) if x == iid])
        if len(idx) < 2:
            warnings.warn(f"instance {iid} has a single decomposition; its score is 0", stacklevel=2)
        gi = _finite_fill(gap[idx])
        g[idx] = min_max_normalize(gi)
        t[idx] = min_max_normalize(tim[idx])
        meta[iid] = {
            "gap_min": float(gi.min()),
            "gap_max": float(gi.max()),
            "time_min": float(tim[idx].min()),
            "time_max": float(tim[idx].max()),
        }
    score = 0.5 * g + 0.5 * t
    return LabeledDataset(ids, keys, X, gap, tim, g, t, score, tuple(feature_names), meta)


# -- models --------------------------------------------------------------------


@dataclass
class RankingModel:
    """A fitted regressor with optional train-fold feature scaling.

    ``predict`` takes raw feature rows; the stored scaler (if any) and the
    stored column subset are applied first.
    """

    kind: str
    weights: np.ndarray | None = None
    intercept: float = 0.0
    alpha: float | None = None
    k: int | None = None
    train_X: np.ndarray | None = None
    train_y: np.ndarray | None = None
    members: list = field(default_factory=list)
    scaler: FeatureScaler | None = None
    columns: list | None = None
    feature_names: tuple = ()

    def _prepare(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.columns is not None:
            X = X[:, self.columns]
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X

    def predict(self, X) -> np.ndarray:
        if self.kind == "voting":
            return np.mean([m.predict(X) for m in self.members], axis=0)
        Z = self._prepare(X)
        if self.kind == "knn":
            return np.array([_knn_one(self.train_X, self.train_y, z, self.k) for z in Z])
        return Z @ self.weights + self.intercept

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "alpha": self.alpha, "k": self.k, "feature_names": list(self.feature_names)}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
            out["intercept"] = self.intercept
        if self.train_X is not None:
            out["train_X"] = self.train_X.tolist()
            out["train_y"] = self.train_y.tolist()
        if self.scaler is not None:
            out["scaler"] = {"mins": self.scaler.mins.tolist(), "maxs": self.scaler.maxs.tolist()}
        if self.columns is not None:
            out["columns"] = list(self.columns)
        if self.members:
            out["members"] = [m.to_dict() for m in self.members]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RankingModel":
        arr = lambda v: None if v is None else np.asarray(v, dtype=float)  # noqa: E731
        sc = d.get("scaler")
        return cls(
            kind=d["kind"],
            weights=arr(d.get("weights")),
            intercept=float(d.get("intercept", 0.0)),
            alpha=d.get("alpha"),
            k=d.get("k"),
            train_X=arr(d.get("train_X")),
            train_y=arr(d.get("train_y")),
            members=[cls.from_dict(m) for m in d.get("members", [])],
            scaler=FeatureScaler(arr(sc["mins"]), arr(sc["maxs"])) if sc else None,
            columns=d.get("columns"),
            feature_names=tuple(d.get("feature_names", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RankingModel":
        return cls.from_dict(json.loads(text))


def predict(model: RankingModel, x) -> np.ndarray:
    return model.predict(x)


def _check_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y disagree on the number of rows")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    return X, y


def fit_ridge(X, y, alpha: float = RIDGE_ALPHA) -> RankingModel:
    """Ridge regression with an unpenalised intercept (centred normal equations)."""
    X, y = _check_xy(X, y)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    G = Xc.T @ Xc
    if alpha == 0 and np.linalg.matrix_rank(Xc) < X.shape[1]:
        raise ValueError("rank-deficient design with alpha = 0")
    w = np.linalg.solve(G + alpha * np.eye(X.shape[1]), Xc.T @ yc)
    return RankingModel("ridge", weights=w, intercept=float(ym - xm @ w), alpha=alpha)


def soft_threshold(z: float, a: float) -> float:
    if z > a:
        return z - a
    if z < -a:
        return z + a
    return 0.0


def fit_lasso(X, y, alpha: float = LASSO_ALPHA, tol: float = 1e-8, max_sweeps: int = 10_000) -> RankingModel:
    """Lasso by cyclic coordinate descent on ``1/(2n) ||y - Xw - w0||^2 + alpha ||w||_1``."""
    X, y = _check_xy(X, y)
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    n, p = X.shape
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    sq = (Xc**2).sum(axis=0) / n
    w = np.zeros(p)
    r = yc.copy()
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            if sq[j] == 0:
                continue
            old = w[j]
            rho = Xc[:, j] @ r / n + sq[j] * old
            new = soft_threshold(rho, alpha) / sq[j]
            if new != old:
                r -= Xc[:, j] * (new - old)
                w[j] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return RankingModel("lasso", weights=w, intercept=float(ym - xm @ w), alpha=alpha)


def _knn_one(X, y, z, k):
    d = np.sqrt(((X - z) ** 2).sum(axis=1))
    idx = np.argsort(d, kind="stable")[:k]
    return float(y[idx].mean())


def fit_knn(X, y, k: int = KNN_K) -> RankingModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k={k} needs between 1 and {X.shape[0]} neighbours")
    return RankingModel("knn", k=k, train_X=X.copy(), train_y=y.copy())


def fit_voting(models) -> RankingModel:
    models = list(models)
    if len(models) < 2:
        raise ValueError("voting needs at least two base models")
    return RankingModel("voting", members=models)


def train_model(kind: str, X, y, feature_names=FEATURE_NAMES) -> RankingModel:
    """Fit ``kind`` on raw features with min-max scaling fitted on ``X``.

    ``rc_ridge`` and ``rc_lasso`` only see the four relaxed-row features.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    X = np.asarray(X, dtype=float)
    cols = None
    if kind.startswith("rc_"):
        cols = [list(feature_names).index(n) for n in RC_FEATURES]
        X = X[:, cols]
    scaler = FeatureScaler.fit(X)
    Z = scaler.transform(X)
    base = kind.removeprefix("rc_")
    if base == "ridge":
        model = fit_ridge(Z, y)
    elif base == "lasso":
        model = fit_lasso(Z, y)
    elif base == "knn":
        model = fit_knn(Z, y, min(KNN_K, len(Z)))
    else:
        members = [train_model(k, X, y, feature_names) for k in ("ridge", "lasso", "knn")]
        model = fit_voting(members)
        model.feature_names = tuple(feature_names)
        return model
    model.kind = kind
    model.scaler = scaler
    model.columns = cols
    model.feature_names = tuple(feature_names)
    return model


# -- selection protocol ---------------------------------------------------------


@dataclass
class Selection:
    selected: list
    best_score: float
    rmse: float


def renormalized(scores) -> np.ndarray:
    return min_max_normalize(scores)


def select_top(order, keys, scores, top_k: int = 8) -> float:
    """Best renormalised true score among the first ``top_k`` keys of ``order``."""
    renorm = dict(zip(keys, renormalized(scores)))
    return float(min(renorm[k] for k in list(order)[:top_k]))


def rank_and_select(model: RankingModel, keys, X, scores, top_k: int = 8) -> Selection:
    """Apply ``model`` to one instance's population and score its top picks."""
    keys = list(keys)
    pred = np.asarray(model.predict(X), dtype=float)
    scores = np.asarray(scores, dtype=float)
    order = [keys[i] for i in sorted(range(len(keys)), key=lambda i: (pred[i], keys[i]))]
    chosen = order[:top_k]
    rmse = float(np.sqrt(np.mean((pred - scores) ** 2)))
    return Selection(chosen, select_top(order, keys, scores, top_k), rmse)


def random_selection_expectation(scores, top_k: int = 8) -> float:
    """Exact mean of the best renormalised score over uniform ``top_k`` subsets."""
    s = np.sort(renormalized(scores))
    n = len(s)
    k = min(top_k, n)
    total = comb(n, k)
    return float(sum(comb(n - i - 1, k - 1) * s[i] for i in range(n - k + 1)) / total)


def random_selection(scores, rng, top_k: int = 8) -> float:
    s = renormalized(scores)
    k = min(top_k, len(s))
    return float(s[rng.choice(len(s), size=k, replace=False)].min())


def leave_one_instance_out(dataset: LabeledDataset, kind: str, top_k: int = 8, audit=None) -> list[dict]:
    """Hold out each instance in turn, train on the rest, rank the held-out rows.

    ``audit(test_instance, train_rows)``, when given, sees the training rows
    of every fold before fitting.
    """
    instances = dataset.instances()
    if len(instances) < 2:
        raise ValueError("leave-one-instance-out needs at least two instances")
    out = []
    for iid in instances:
        test = dataset.rows_of(iid)
        train = np.array([r for r in range(len(dataset)) if dataset.instance_ids[r] != iid], dtype=int)
        if audit is not None:
            audit(iid, train)
        model = train_model(kind, dataset.X[train], dataset.score[train], dataset.feature_names)
        sel = rank_and_select(model, [dataset.keys[r] for r in test], dataset.X[test], dataset.score[test], top_k)
        out.append({"instance": iid, "selected_score": sel.best_score, "rmse": sel.rmse, "rows": len(test)})
    return out


def rc_only_model(dataset: LabeledDataset, regularizer: str = "ridge") -> RankingModel:
    if regularizer not in ("ridge", "lasso"):
        raise ValueError("regularizer must be 'ridge' or 'lasso'")
    return train_model("rc_" + regularizer, dataset.X, dataset.score, dataset.feature_names)


def feature_spread_diagnostic(X) -> float:
    """Share of rows whose every feature lies within its Tukey fences."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    q1, q3 = np.percentile(X, [25, 75], axis=0)
    iqr = q3 - q1
    inside = (X >= q1 - 1.5 * iqr) & (X <= q3 + 1.5 * iqr)
    return float(inside.all(axis=1).mean())


__all__ = [
    "FeatureScaler",
    "LabeledDataset",
    "RankingModel",
    "Selection",
    "feature_spread_diagnostic",
    "fit_knn",
    "fit_lasso",
    "fit_ridge",
    "fit_voting",
    "label_dataset",
    "leave_one_instance_out",
    "min_max_normalize",
    "predict",
    "random_selection",
    "random_selection_expectation",
    "rank_and_select",
    "rc_only_model",
    "select_top",
    "train_model",
]
