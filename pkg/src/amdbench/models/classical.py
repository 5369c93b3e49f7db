"""Classical models: SVMs via dual coordinate descent, KNN, random forest.

The linear and precomputed-kernel SVMs solve the L1-loss dual with box
constraints (Hsieh et al.-style coordinate descent); the bias is absorbed by
an appended unit feature (linear) or a unit kernel offset (kernel).
"""

from __future__ import annotations

import pickle

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from ..data import KIND_DENSE, KIND_KERNEL, EncodedDataset
from .neural import ShapeMismatchError, _require_kind
from .spec import KNNSpec, KernelSVMSpec, LinearSVMSpec, RandomForestSpec, TrainConfig


class SingleClassError(ValueError):
    pass


def _dense_matrix(ds: EncodedDataset, who: str) -> np.ndarray:
    _require_kind(ds, KIND_DENSE, who)
    if isinstance(ds.payload, tuple):
        raise ShapeMismatchError(f"{who} expects a single dense matrix")
    return np.asarray(ds.payload, dtype=float)


def _signed_labels(y: np.ndarray) -> np.ndarray:
    return np.where(y > 0, 1.0, -1.0)


def _per_sample_c(spec, y_signed: np.ndarray) -> np.ndarray:
    """Box constraints; 'balanced' rescales each class by n / (2 n_class)."""
    c = np.full(len(y_signed), float(spec.C))
    if spec.class_weight == "balanced":
        n = len(y_signed)
        for cls in (-1.0, 1.0):
            n_cls = float(np.sum(y_signed == cls))
            if n_cls:
                c[y_signed == cls] *= n / (2.0 * n_cls)
    return c


class LinearSVM:
    """L1-loss linear SVM trained by dual coordinate descent."""

    def __init__(self, spec: LinearSVMSpec):
        self.spec = spec
        self.training_log: list[tuple[int, float, float]] = []

    def fit(self, train: EncodedDataset, val: EncodedDataset | None, cfg: TrainConfig) -> "LinearSVM":
        x = _dense_matrix(train, "linear svm")
        y = _signed_labels(train.labels)
        if len(np.unique(train.labels)) < 2:
            raise SingleClassError("linear svm needs both classes in training data")
        n, d = x.shape
        xb = np.concatenate([x, np.ones((n, 1))], axis=1)  # bias feature
        c = _per_sample_c(self.spec, y)
        rng = np.random.default_rng(cfg.seed)
        alpha = np.zeros(n)
        w = np.zeros(d + 1)
        qii = np.einsum("ij,ij->i", xb, xb)
        for it in range(self.spec.max_iter):
            max_pg = 0.0
            for i in rng.permutation(n):
                if qii[i] <= 0:
                    continue
                g = y[i] * (xb[i] @ w) - 1.0
                pg = g
                if alpha[i] <= 0:
                    pg = min(g, 0.0)
                elif alpha[i] >= c[i]:
                    pg = max(g, 0.0)
                max_pg = max(max_pg, abs(pg))
                if pg != 0.0:
                    old = alpha[i]
                    alpha[i] = min(max(alpha[i] - g / qii[i], 0.0), c[i])
                    delta = (alpha[i] - old) * y[i]
                    if delta:
                        w += delta * xb[i]
            if max_pg < self.spec.tol:
                break
        self.weights = w[:-1]
        self.bias = float(w[-1])
        self.n_features = d
        self.training_log = [(it, 0.0, 0.0)]
        return self

    def decision_values(self, ds: EncodedDataset) -> np.ndarray:
        x = _dense_matrix(ds, "linear svm")
        if x.shape[1] != self.n_features:
            raise ShapeMismatchError(f"expected {self.n_features} features, got {x.shape[1]}")
        return x @ self.weights + self.bias

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        return self.decision_values(ds)

    def predict(self, ds: EncodedDataset) -> np.ndarray:
        return (self.decision_values(ds) > 0).astype(np.int64)


class KernelSVM:
    """SVM on a precomputed kernel; solves the unconstrained-bias dual on K + 1."""

    def __init__(self, spec: KernelSVMSpec):
        self.spec = spec
        self.training_log: list[tuple[int, float, float]] = []

    def fit(self, train: EncodedDataset, val: EncodedDataset | None, cfg: TrainConfig) -> "KernelSVM":
        _require_kind(train, KIND_KERNEL, "kernel svm")
        k = np.asarray(train.payload, dtype=float)
        if k.shape[0] != k.shape[1]:
            raise ShapeMismatchError("training kernel must be square")
        y = _signed_labels(train.labels)
        if len(np.unique(train.labels)) < 2:
            raise SingleClassError("kernel svm needs both classes in training data")
        n = k.shape[0]
        ko = k + 1.0  # unit offset absorbs the bias
        c = _per_sample_c(self.spec, y)
        rng = np.random.default_rng(cfg.seed)
        alpha = np.zeros(n)
        # o[j] = sum_i alpha_i y_i Ko[j, i], maintained incrementally
        o = np.zeros(n)
        qii = np.diag(ko).copy()
        for it in range(self.spec.max_iter):
            max_pg = 0.0
            for i in rng.permutation(n):
                if qii[i] <= 0:
                    continue
                g = y[i] * o[i] - 1.0
                pg = g
                if alpha[i] <= 0:
                    pg = min(g, 0.0)
                elif alpha[i] >= c[i]:
                    pg = max(g, 0.0)
                max_pg = max(max_pg, abs(pg))
                if pg != 0.0:
                    old = alpha[i]
                    alpha[i] = min(max(alpha[i] - g / qii[i], 0.0), c[i])
                    delta = alpha[i] - old
                    if delta:
                        o += delta * y[i] * ko[:, i]
            if max_pg < self.spec.tol:
                break
        self.alpha = alpha
        self.y = y
        self.n_train = n
        self.training_log = [(it, 0.0, 0.0)]
        return self

    def decision_values(self, ds: EncodedDataset) -> np.ndarray:
        _require_kind(ds, KIND_KERNEL, "kernel svm")
        k = np.asarray(ds.payload, dtype=float)
        if k.shape[1] != self.n_train:
            raise ShapeMismatchError(
                f"kernel has {k.shape[1]} training columns, expected {self.n_train}"
            )
        return (k + 1.0) @ (self.alpha * self.y)

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        return self.decision_values(ds)

    def predict(self, ds: EncodedDataset) -> np.ndarray:
        return (self.decision_values(ds) > 0).astype(np.int64)


class KNN:
    """Exhaustive Euclidean k-nearest-neighbors; score = malicious vote share."""

    def __init__(self, spec: KNNSpec):
        self.spec = spec
        self.training_log: list[tuple[int, float, float]] = []

    def fit(self, train: EncodedDataset, val: EncodedDataset | None, cfg: TrainConfig) -> "KNN":
        self.x = _dense_matrix(train, "knn")
        self.y = train.labels.astype(float)
        self.n_features = self.x.shape[1]
        return self

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        x = _dense_matrix(ds, "knn")
        if x.shape[1] != self.n_features:
            raise ShapeMismatchError(f"expected {self.n_features} features, got {x.shape[1]}")
        if x.shape[0] == 0:
            return np.zeros(0)
        k = min(self.spec.k, len(self.y))
        scores = np.empty(x.shape[0])
        # chunked exhaustive distances; stable argsort keeps ties deterministic
        for start in range(0, x.shape[0], 512):
            chunk = x[start : start + 512]
            d2 = (
                np.sum(chunk**2, axis=1)[:, None]
                - 2.0 * chunk @ self.x.T
                + np.sum(self.x**2, axis=1)[None, :]
            )
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            scores[start : start + 512] = self.y[order].mean(axis=1)
        return scores

    def predict(self, ds: EncodedDataset) -> np.ndarray:
        return (self.app_scores(ds) >= 0.5).astype(np.int64)


class RandomForest:
    """scikit-learn forest with the paper's 'default hyper-parameters'."""

    def __init__(self, spec: RandomForestSpec):
        self.spec = spec
        self.training_log: list[tuple[int, float, float]] = []

    def fit(self, train: EncodedDataset, val: EncodedDataset | None, cfg: TrainConfig) -> "RandomForest":
        x = _dense_matrix(train, "random forest")
        y = train.labels
        if len(np.unique(y)) < 2:
            raise SingleClassError("random forest needs both classes in training data")
        self.clf = RandomForestClassifier(
            n_estimators=self.spec.n_trees,
            criterion="gini",
            max_features="sqrt",
            max_depth=self.spec.max_depth,
            random_state=cfg.seed % (2**32),
            n_jobs=1,
        )
        self.clf.fit(x, y)
        self.n_features = x.shape[1]
        return self

    def app_scores(self, ds: EncodedDataset) -> np.ndarray:
        x = _dense_matrix(ds, "random forest")
        if x.shape[1] != self.n_features:
            raise ShapeMismatchError(f"expected {self.n_features} features, got {x.shape[1]}")
        proba = self.clf.predict_proba(x)
        malicious_col = list(self.clf.classes_).index(1)
        return proba[:, malicious_col]

    def predict(self, ds: EncodedDataset) -> np.ndarray:
        return (self.app_scores(ds) >= 0.5).astype(np.int64)


def pickle_blob(obj) -> np.ndarray:
    return np.frombuffer(pickle.dumps(obj), dtype=np.uint8).copy()


def unpickle_blob(blob: np.ndarray):
    return pickle.loads(blob.tobytes())
