import numpy as np
import pytest

import amdbench.models as M
from amdbench.data import KIND_DENSE, KIND_KERNEL, EncodedDataset


def _dense(x, y, **meta):
    return EncodedDataset(
        kind=KIND_DENSE,
        payload=np.asarray(x, dtype=float),
        row_ids=tuple(f"r{i}" for i in range(len(x))),
        labels=np.asarray(y, dtype=np.int64),
        meta=meta,
    )


def _separable_set(rng, n=60, d=5, margin=1.0):
    w = rng.normal(size=d)
    w /= np.linalg.norm(w)
    x = rng.normal(size=(n, d))
    raw = x @ w
    y = (raw > 0).astype(int)
    # push every point off the hyperplane by the margin
    x += np.outer(np.where(y == 1, margin, -margin) - 0.0, w) * (np.abs(raw) < margin)[:, None]
    return x, y, w


# ---------------------------------------------------------------------------
# Linear SVM


def test_linear_svm_separable_training_accuracy_one(rng):
    x, y, w_true = _separable_set(rng)
    # exhaustive margin check of the construction itself
    assert np.all((x @ w_true > 0).astype(int) == y)
    ds = _dense(x, y)
    model = M.fit(M.build_model(M.LinearSVMSpec()), ds, None, M.TrainConfig(seed=0))
    assert np.array_equal(M.predict_labels(model, ds), y)


def test_linear_svm_2d_example():
    x = np.array([[0.0, 2.0], [0.0, 3.0], [0.0, -2.0], [0.0, -3.0], [1.0, 2.5], [1.0, -2.5]])
    y = np.array([1, 1, 0, 0, 1, 0])
    ds = _dense(x, y)
    model = M.fit(M.build_model(M.LinearSVMSpec()), ds, None, M.TrainConfig(seed=0))
    assert np.array_equal(M.predict_labels(model, ds), y)


def test_linear_svm_single_class_errors():
    ds = _dense(np.random.default_rng(0).random((10, 3)), np.ones(10, dtype=int))
    with pytest.raises(M.SingleClassError):
        M.fit(M.build_model(M.LinearSVMSpec()), ds, None, M.TrainConfig(seed=0))


def test_linear_svm_deterministic(rng):
    x, y, _ = _separable_set(rng)
    ds = _dense(x, y)
    m1 = M.fit(M.build_model(M.LinearSVMSpec()), ds, None, M.TrainConfig(seed=3))
    m2 = M.fit(M.build_model(M.LinearSVMSpec()), ds, None, M.TrainConfig(seed=3))
    assert np.array_equal(m1.weights, m2.weights)
    assert m1.bias == m2.bias


# ---------------------------------------------------------------------------
# Kernel SVM vs a quadratic-programming oracle


def _qp_oracle_decisions(k, y01, c_vec):
    """Solve the box-constrained dual exactly with cvxopt on K + 1."""
    import cvxopt

    cvxopt.solvers.options["show_progress"] = False
    y = np.where(np.asarray(y01) > 0, 1.0, -1.0)
    ko = np.asarray(k, dtype=float) + 1.0
    n = ko.shape[0]
    q_mat = np.outer(y, y) * ko
    p = cvxopt.matrix(q_mat + 1e-10 * np.eye(n))
    q = cvxopt.matrix(-np.ones(n))
    g = cvxopt.matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = cvxopt.matrix(np.concatenate([np.zeros(n), c_vec]))
    sol = cvxopt.solvers.qp(p, q, g, h)
    alpha = np.array(sol["x"]).ravel()
    return ko @ (alpha * y)


def test_kernel_svm_matches_qp_oracle(rng):
    n, d = 18, 4
    x = rng.normal(size=(n, d))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
    if len(np.unique(y)) < 2:
        y[0] = 1 - y[0]
    k = x @ x.T
    ds = EncodedDataset(
        kind=KIND_KERNEL,
        payload=k,
        row_ids=tuple(f"r{i}" for i in range(n)),
        labels=y,
        meta={"is_train": True},
    )
    spec = M.KernelSVMSpec(C=1.0, max_iter=20000, tol=1e-10)
    model = M.fit(M.build_model(spec), ds, None, M.TrainConfig(seed=0))
    ours = model.decision_values(ds)

    y_signed = np.where(y > 0, 1.0, -1.0)
    c_vec = np.full(n, 1.0)
    for cls in (-1.0, 1.0):
        n_cls = np.sum(y_signed == cls)
        c_vec[y_signed == cls] *= n / (2.0 * n_cls)
    oracle = _qp_oracle_decisions(k, y, c_vec)
    assert np.max(np.abs(ours - oracle)) < 1e-3 * max(1.0, np.max(np.abs(oracle)))
    assert np.array_equal(ours > 0, oracle > 0)


def test_kernel_svm_requires_square_train():
    k = np.ones((3, 4))
    ds = EncodedDataset(
        kind=KIND_KERNEL,
        payload=k,
        row_ids=("a", "b", "c"),
        labels=np.array([0, 1, 0]),
        meta={},
    )
    with pytest.raises(M.ShapeMismatchError):
        M.fit(M.build_model(M.KernelSVMSpec()), ds, None, M.TrainConfig(seed=0))


# ---------------------------------------------------------------------------
# KNN vs exhaustive oracle


def _oracle_knn_scores(x_train, y_train, x_test, k):
    scores = []
    for q in x_test:
        dists = sorted(
            (float(np.sum((q - xi) ** 2)), i) for i, xi in enumerate(x_train)
        )
        top = [y_train[i] for _d, i in dists[: min(k, len(y_train))]]
        scores.append(sum(top) / len(top))
    return np.array(scores)


@pytest.mark.parametrize("k", [1, 3])
def test_knn_matches_oracle(k, rng):
    for _ in range(20):
        n = int(rng.integers(5, 40))
        d = int(rng.integers(1, 6))
        x_train = rng.normal(size=(n, d)).round(3)  # rounding provokes ties
        y_train = rng.integers(0, 2, size=n)
        x_test = rng.normal(size=(8, d)).round(3)
        train = _dense(x_train, y_train)
        test = _dense(x_test, np.zeros(8, dtype=int))
        model = M.fit(M.build_model(M.KNNSpec(k=k)), train, None, M.TrainConfig(seed=0))
        ours = M.predict_scores(model, test)
        oracle = _oracle_knn_scores(x_train, y_train, x_test, k)
        assert np.allclose(ours, oracle)


def test_knn_k1_score_is_neighbor_label():
    train = _dense([[0.0], [10.0]], [0, 1])
    test = _dense([[1.0], [9.0]], [0, 0])
    model = M.fit(M.build_model(M.KNNSpec(k=1)), train, None, M.TrainConfig(seed=0))
    assert list(M.predict_scores(model, test)) == [0.0, 1.0]


def test_knn_constant_labels_degenerate():
    train = _dense([[0.0], [1.0], [2.0]], [1, 1, 1])
    test = _dense([[5.0]], [0])
    model = M.fit(M.build_model(M.KNNSpec(k=3)), train, None, M.TrainConfig(seed=0))
    assert list(M.predict_labels(model, test)) == [1]


# ---------------------------------------------------------------------------
# Random forest (library-backed behind the contract)


def test_random_forest_perfect_separation(rng):
    x, y, _ = _separable_set(rng, n=80)
    ds = _dense(x, y)
    model = M.fit(M.build_model(M.RandomForestSpec()), ds, None, M.TrainConfig(seed=1))
    assert np.mean(M.predict_labels(model, ds) == y) == 1.0


def test_random_forest_deterministic(rng):
    x, y, _ = _separable_set(rng, n=40)
    ds = _dense(x, y)
    s1 = M.predict_scores(
        M.fit(M.build_model(M.RandomForestSpec()), ds, None, M.TrainConfig(seed=5)), ds
    )
    s2 = M.predict_scores(
        M.fit(M.build_model(M.RandomForestSpec()), ds, None, M.TrainConfig(seed=5)), ds
    )
    assert np.array_equal(s1, s2)


def test_random_forest_single_class_errors():
    ds = _dense(np.zeros((5, 2)), np.zeros(5, dtype=int))
    with pytest.raises(M.SingleClassError):
        M.fit(M.build_model(M.RandomForestSpec()), ds, None, M.TrainConfig(seed=0))


# ---------------------------------------------------------------------------
# Contract plumbing


def test_fit_rejects_empty_and_nonbinary():
    empty = _dense(np.zeros((0, 3)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError, match="empty"):
        M.fit(M.build_model(M.LinearSVMSpec()), empty, None, M.TrainConfig())
    bad = _dense(np.zeros((3, 2)), np.array([0, 1, 2]))
    with pytest.raises(ValueError, match="binary"):
        M.fit(M.build_model(M.LinearSVMSpec()), bad, None, M.TrainConfig())


def test_predict_empty_dataset(rng):
    x, y, _ = _separable_set(rng, n=30)
    model = M.fit(M.build_model(M.LinearSVMSpec()), _dense(x, y), None, M.TrainConfig())
    empty = _dense(np.zeros((0, x.shape[1])), np.zeros(0, dtype=int))
    assert list(M.predict_labels(model, empty)) == []


def test_shape_mismatch_raises(rng):
    x, y, _ = _separable_set(rng, n=30, d=4)
    model = M.fit(M.build_model(M.LinearSVMSpec()), _dense(x, y), None, M.TrainConfig())
    with pytest.raises(M.ShapeMismatchError):
        M.predict_labels(model, _dense(np.zeros((2, 7)), np.zeros(2, dtype=int)))


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        M.AEClassifierSpec(lambda1=0.0)
    with pytest.raises(ValueError):
        M.KNNSpec(k=0)
    with pytest.raises(ValueError):
        M.LinearSVMSpec(C=-1)


def test_finite_difference_not_applicable_for_knn():
    train = _dense([[0.0], [1.0]], [0, 1])
    model = M.fit(M.build_model(M.KNNSpec(k=1)), train, None, M.TrainConfig())
    with pytest.raises(M.NotApplicableError, match="not applicable"):
        M.finite_difference_check(model, train)


# ---------------------------------------------------------------------------
# Checkpoints and training logs


@pytest.mark.parametrize(
    "spec",
    [M.LinearSVMSpec(), M.KNNSpec(k=3), M.RandomForestSpec(n_trees=10)],
)
def test_classical_checkpoint_round_trip(spec, rng, tmp_path):
    x, y, _ = _separable_set(rng, n=30)
    ds = _dense(x, y)
    cfg = M.TrainConfig(seed=2)
    model = M.fit(M.build_model(spec), ds, None, cfg)
    path = tmp_path / "model.bin"
    M.save_checkpoint(model, spec, cfg, path)
    loaded, loaded_spec, _cfg = M.load_checkpoint(path)
    assert loaded_spec == spec
    assert np.allclose(M.predict_scores(loaded, ds), M.predict_scores(model, ds))


def test_neural_checkpoint_round_trip(rng, tmp_path):
    x, y, _ = _separable_set(rng, n=30)
    ds = _dense(x, y)
    spec = M.SubstituteMLPSpec(hidden=16)
    cfg = M.TrainConfig(seed=2, max_epochs=5, desk_scale_factor=1)
    model = M.fit(M.build_model(spec), ds, ds, cfg)
    path = tmp_path / "model.bin"
    M.save_checkpoint(model, spec, cfg, path)
    loaded, _spec, _cfg = M.load_checkpoint(path)
    assert np.allclose(M.predict_scores(loaded, ds), M.predict_scores(model, ds))


def test_training_log_csv(rng, tmp_path):
    x, y, _ = _separable_set(rng, n=30)
    ds = _dense(x, y)
    model = M.fit(
        M.build_model(M.SubstituteMLPSpec(hidden=8)),
        ds,
        ds,
        M.TrainConfig(seed=1, max_epochs=4, desk_scale_factor=1),
    )
    path = tmp_path / "log.csv"
    M.write_training_log(model, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_f1"
    assert len(lines) == 1 + len(model.training_log)
