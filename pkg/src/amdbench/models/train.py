"""Uniform build/fit/predict contract over the model zoo, plus verification tools."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..data import EncodedDataset
from ..metrics import confusion, f1
from .classical import KNN, KernelSVM, LinearSVM, RandomForest, SingleClassError
from .neural import (
    AEClassifier,
    AttentionMLP,
    CNNClassifier,
    GNNClassifier,
    LSTMClassifier,
    MultimodalMLP,
    NeuralModel,
    ShapeMismatchError,
    SubstituteMLP,
)
from .nncore import Adam, restore, snapshot
from .spec import (
    AEClassifierSpec,
    AttentionMLPSpec,
    CNNSpec,
    GNNSpec,
    KNNSpec,
    KernelSVMSpec,
    LSTMSpec,
    LinearSVMSpec,
    ModelSpec,
    MultimodalMLPSpec,
    RandomForestSpec,
    SubstituteMLPSpec,
    TrainConfig,
)

_MODEL_CLASSES = {
    LinearSVMSpec: LinearSVM,
    KernelSVMSpec: KernelSVM,
    KNNSpec: KNN,
    RandomForestSpec: RandomForest,
    MultimodalMLPSpec: MultimodalMLP,
    AttentionMLPSpec: AttentionMLP,
    LSTMSpec: LSTMClassifier,
    CNNSpec: CNNClassifier,
    AEClassifierSpec: AEClassifier,
    GNNSpec: GNNClassifier,
    SubstituteMLPSpec: SubstituteMLP,
}


class NotApplicableError(TypeError):
    pass


def build_model(spec: ModelSpec):
    """Instantiate an untrained model for *spec*."""
    cls = _MODEL_CLASSES.get(type(spec))
    if cls is None:
        raise ValueError(f"unknown model spec {type(spec).__name__}")
    return cls(spec)


def fit(model, train: EncodedDataset, val: EncodedDataset | None, cfg: TrainConfig):
    """Train *model*; neural families early-stop on validation F1."""
    if train.n_rows == 0:
        raise ValueError("empty training set")
    if set(np.unique(train.labels)) - {0, 1}:
        raise ValueError("labels must be binary (0/1)")
    if isinstance(model, NeuralModel):
        return _fit_neural(model, train, val, cfg)
    return model.fit(train, val, cfg)


def predict_scores(fitted, dataset: EncodedDataset) -> np.ndarray:
    """Real-valued scores, higher = more malicious."""
    scores = fitted.app_scores(dataset)
    if not np.all(np.isfinite(scores)):
        raise RuntimeError("non-finite prediction scores")
    return scores


def predict_labels(fitted, dataset: EncodedDataset, threshold: float | None = None) -> np.ndarray:
    """Binary labels: sign rule for SVMs, 0.5 on calibrated scores otherwise."""
    if threshold is None:
        return fitted.predict(dataset)
    return (predict_scores(fitted, dataset) > threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# Neural training loop


def _batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def _val_f1(model: NeuralModel, val_prep) -> float:
    scores = model.scores_from_prep(val_prep)
    labels = model.app_labels(val_prep).astype(np.int64)
    preds = (scores > 0.5).astype(np.int64)
    return f1(confusion(list(labels), list(preds)))


def _fit_neural(model: NeuralModel, train, val, cfg: TrainConfig):
    prep = model.prepare(train)
    n = model.n_units(prep)
    if n == 0:
        raise ValueError("training set has no trainable units")
    labels = model.unit_labels(prep)
    if len(np.unique(labels)) < 2:
        raise SingleClassError(f"{type(model).__name__} needs both classes in training data")
    n_pos = float(np.sum(labels == 1))
    model.pos_weight = float(np.clip((len(labels) - n_pos) / n_pos, 1.0, 10.0))
    rng = np.random.default_rng(cfg.seed)
    dims = model.dims_of(prep)
    model.init_params(dims, cfg, rng)
    model._dims = dims

    if isinstance(model, AEClassifier):
        _ae_pretrain(model, prep, rng)

    opt = Adam(model.params, lr=model.spec.lr)
    val_prep = model.prepare(val) if val is not None and val.n_rows else None

    sort_key = model.unit_sort_key(prep)
    if sort_key is not None:
        base_order = np.argsort(sort_key, kind="stable")
        fixed_batches = _batches(base_order, model.spec.batch)
    else:
        fixed_batches = None

    best_params = snapshot(model.params)
    best_f1 = -1.0
    best_epoch = -1
    model.training_log = []
    for epoch in range(cfg.max_epochs):
        if fixed_batches is not None:
            batch_order = rng.permutation(len(fixed_batches))
            epoch_batches = [fixed_batches[i] for i in batch_order]
        else:
            epoch_batches = _batches(rng.permutation(n), model.spec.batch)
        total_loss = 0.0
        for idx in epoch_batches:
            loss, grads = model.loss_and_grads(prep, idx)
            opt.step(grads)
            total_loss += loss * len(idx)
        mean_loss = total_loss / n
        vf1 = _val_f1(model, val_prep) if val_prep is not None else float("nan")
        model.training_log.append((epoch, mean_loss, vf1))
        if val_prep is not None:
            if vf1 > best_f1 + 1e-12:
                best_f1 = vf1
                best_epoch = epoch
                best_params = snapshot(model.params)
            elif epoch - best_epoch >= cfg.patience:
                break
    if val_prep is not None and best_epoch >= 0:
        restore(model.params, best_params)
    model._fitted = True
    return model


def _ae_pretrain(model: AEClassifier, prep, rng: np.random.Generator) -> None:
    """Reconstruction phase; epochs that worsen the training loss are rejected
    (parameters restored, learning rate halved), so the recorded loss series is
    non-increasing."""
    opt = Adam(model.params, lr=model.spec.lr)
    n = len(prep["labels"])
    history = [model.recon_loss(prep["x"])]
    for _ in range(model.spec.ae_epochs):
        saved = snapshot(model.params)
        for idx in _batches(rng.permutation(n), model.spec.batch):
            _, grads = model.ae_loss_and_grads(prep, idx)
            opt.step(grads)
        loss = model.recon_loss(prep["x"])
        if loss > history[-1]:
            restore(model.params, saved)
            opt.lr *= 0.5
            history.append(history[-1])
        else:
            history.append(loss)
    model.ae_recon_history = tuple(history)


# ---------------------------------------------------------------------------
# Finite-difference gradient verification


def finite_difference_check(
    model,
    dataset: EncodedDataset,
    epsilon: float = 1e-5,
    max_params: int = 20,
    seed: int = 0,
    cfg: TrainConfig | None = None,
) -> float:
    """Compare analytic gradients to central differences on sampled parameters.

    Returns the max relative error over <= *max_params* randomly chosen
    parameter entries.  Raises ``NotApplicableError`` for models without a
    differentiable loss.
    """
    if not isinstance(model, NeuralModel):
        raise NotApplicableError("not applicable: model has no differentiable loss")
    cfg = cfg or TrainConfig()
    prep = model.prepare(dataset)
    if not model.params:
        dims = model.dims_of(prep)
        model.init_params(dims, cfg, np.random.default_rng(cfg.seed))
        model._dims = dims
    n = model.n_units(prep)
    idx = np.arange(min(n, 8))
    _, grads = model.loss_and_grads(prep, idx)

    rng = np.random.default_rng(seed)
    names = sorted(model.params)
    entries = []
    for _ in range(max_params):
        name = names[int(rng.integers(len(names)))]
        flat = int(rng.integers(model.params[name].size))
        entries.append((name, flat))

    max_rel = 0.0
    for name, flat in entries:
        p = model.params[name].reshape(-1)
        orig = p[flat]
        p[flat] = orig + epsilon
        loss_plus, _ = model.loss_and_grads(prep, idx)
        p[flat] = orig - epsilon
        loss_minus, _ = model.loss_and_grads(prep, idx)
        p[flat] = orig
        numeric = (loss_plus - loss_minus) / (2 * epsilon)
        analytic = float(np.asarray(grads.get(name, np.zeros_like(model.params[name]))).reshape(-1)[flat])
        denom = max(abs(numeric) + abs(analytic), 1e-6)
        rel = abs(numeric - analytic) / denom
        max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# Checkpoints and training logs

_MAGIC = b"AMDBMDL1"


def _model_state(fitted) -> tuple[dict[str, np.ndarray], dict]:
    if isinstance(fitted, NeuralModel):
        aux = {"kind": "neural", "dims": fitted.dims_of_state()}
        return dict(fitted.params), aux
    if isinstance(fitted, LinearSVM):
        return (
            {"weights": fitted.weights, "bias": np.array([fitted.bias])},
            {"kind": "linear_svm", "n_features": fitted.n_features},
        )
    if isinstance(fitted, KernelSVM):
        return (
            {"alpha": fitted.alpha, "y": fitted.y},
            {"kind": "kernel_svm", "n_train": fitted.n_train},
        )
    if isinstance(fitted, KNN):
        return ({"x": fitted.x, "y": fitted.y}, {"kind": "knn", "n_features": fitted.n_features})
    if isinstance(fitted, RandomForest):
        from .classical import pickle_blob

        return (
            {"sklearn_blob": pickle_blob(fitted.clf)},
            {"kind": "random_forest", "n_features": fitted.n_features},
        )
    raise ValueError(f"cannot checkpoint {type(fitted).__name__}")


_SPEC_CLASSES = {cls.__name__: cls for cls in _MODEL_CLASSES}


def save_checkpoint(fitted, spec: ModelSpec, cfg: TrainConfig, path: str | Path) -> None:
    params, aux = _model_state(fitted)
    manifest = []
    blobs = []
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name])
        blob = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        manifest.append(
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "nbytes": len(blob)}
        )
        blobs.append(blob)
    header = {
        "format": 1,
        "spec_type": type(spec).__name__,
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(spec).items()},
        "cfg": vars(cfg),
        "aux": aux,
        "params": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header_bytes).to_bytes(4, "little"))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path):
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError("not an amdbench model checkpoint")
    header_len = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    spec_cls = _SPEC_CLASSES[header["spec_type"]]
    spec_kwargs = {
        k: (tuple(v) if isinstance(v, list) else v) for k, v in header["spec"].items()
    }
    spec = spec_cls(**spec_kwargs)
    cfg = TrainConfig(**header["cfg"])
    params: dict[str, np.ndarray] = {}
    offset = 12 + header_len
    for entry in header["params"]:
        n = entry["nbytes"]
        arr = np.frombuffer(raw[offset : offset + n], dtype=entry["dtype"]).reshape(entry["shape"])
        params[entry["name"]] = arr.copy()
        offset += n
    model = build_model(spec)
    aux = header["aux"]
    if aux["kind"] == "neural":
        model.init_params(aux["dims"], cfg, np.random.default_rng(0))
        model._dims = aux["dims"]
        for name, arr in params.items():
            model.params[name][...] = arr
        model._fitted = True
    elif aux["kind"] == "linear_svm":
        model.weights = params["weights"]
        model.bias = float(params["bias"][0])
        model.n_features = aux["n_features"]
    elif aux["kind"] == "kernel_svm":
        model.alpha = params["alpha"]
        model.y = params["y"]
        model.n_train = aux["n_train"]
    elif aux["kind"] == "knn":
        model.x = params["x"]
        model.y = params["y"]
        model.n_features = aux["n_features"]
    elif aux["kind"] == "random_forest":
        from .classical import unpickle_blob

        model.clf = unpickle_blob(params["sklearn_blob"])
        model.n_features = aux["n_features"]
    else:  # pragma: no cover
        raise ValueError(f"unknown checkpoint kind {aux['kind']}")
    return model, spec, cfg


def write_training_log(fitted, path: str | Path) -> None:
    """CSV of (epoch, train_loss, val_f1) for the fitted model."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_f1"])
        for epoch, loss, vf1 in getattr(fitted, "training_log", []):
            writer.writerow([epoch, f"{loss:.8f}", f"{vf1:.6f}"])
