"""Tests for the from-scratch convolutional classifier.

Proves:
1. Architecture validation: class counts, row/column divisibility and
   pool-survival constraints are enforced; the published geometry maps
   a 320-entry feature to a 1280-unit flat layer; feature reshaping is
   row-major and rejects lengths that do not fill the grid.
2. Optimization settings are validated (validation fraction bounds,
   positive batch size, epoch count and patience).
3. Training input is validated: count mismatches, fewer samples than
   one batch, and single-class data are rejected.
4. A linearly separable two-blob problem is learned to perfect held-out
   accuracy within a small epoch budget, and batch-norm running
   statistics move away from their initialization.
5. Training is deterministic per seed: identical weights and logs.
6. With a zero learning rate the validation loss cannot improve, so
   early stopping halts training after exactly 1 + patience epochs.
7. predict returns a valid probability vector and rejects wrong feature
   lengths; evaluate's confusion matrix rows sum to the class counts,
   its accuracy equals the confusion trace over the total, and per-SNR
   accuracies appear for every distinct tag.
8. Analytic gradients match central finite differences to 1e-4 on a
   small network, and the check rejects oversized probe batches.
9. Checkpoints round-trip bit-exactly through save/load and foreign
   files are rejected; the training log CSV has one row per epoch.
10. The nearest-centroid baseline recovers exact class means, breaks
    distance ties toward the lower label, and solves the blob problem.
"""

import json

import numpy as np
import pytest

from rffsim import cnn


SMALL_SPEC = cnn.CnnSpec(n_classes=2, input_len=16, rows=4)


def _blobs(n_per_class=120, dim=16, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_per_class, dim)) * 0.3 + 2.0
    b = rng.standard_normal((n_per_class, dim)) * 0.3 - 2.0
    x = np.vstack([a, b])
    y = np.repeat([0, 1], n_per_class)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def test_spec_validation_and_geometry():
    with pytest.raises(ValueError):
        cnn.CnnSpec(n_classes=1)
    with pytest.raises(ValueError):
        cnn.CnnSpec(n_classes=2, input_len=321)
    with pytest.raises(ValueError):
        cnn.CnnSpec(n_classes=2, input_len=96, rows=16)
    spec = cnn.CnnSpec(n_classes=10)
    assert spec.cols == 20
    assert spec.flat_len == 4 * 5 * 64
    assert SMALL_SPEC.flat_len == 1 * 1 * 64


def test_reshape_feature_row_major():
    grid = cnn.reshape_feature(np.arange(8.0), rows=4)
    assert grid.shape == (4, 2)
    assert np.array_equal(grid[1], [2.0, 3.0])
    with pytest.raises(ValueError):
        cnn.reshape_feature(np.arange(9.0), rows=4)


def test_train_config_validation():
    with pytest.raises(ValueError):
        cnn.TrainConfig(val_fraction=0.0)
    with pytest.raises(ValueError):
        cnn.TrainConfig(val_fraction=1.0)
    with pytest.raises(ValueError):
        cnn.TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        cnn.TrainConfig(patience=0)


def test_train_input_validation():
    x, y = _blobs(40)
    cfg = cnn.TrainConfig(seed=0)
    with pytest.raises(ValueError):
        cnn.train(x, y[:-1], SMALL_SPEC, cfg)
    with pytest.raises(ValueError):
        cnn.train(x[:10], y[:10], SMALL_SPEC, cfg)
    with pytest.raises(ValueError):
        cnn.train(x, np.zeros(len(y), dtype=int), SMALL_SPEC, cfg)


def test_learns_separable_blobs_and_updates_running_stats():
    x, y = _blobs()
    cfg = cnn.TrainConfig(max_epochs=20, seed=1)
    model, log = cnn.train(x[:160], y[:160], SMALL_SPEC, cfg)
    assert len(log) <= 20
    report = cnn.evaluate(model, x[160:], y[160:])
    assert report["accuracy"] == 1.0
    assert not np.allclose(model.running["bn1_mean"], 0.0)


def test_training_deterministic_per_seed():
    x, y = _blobs(60)
    cfg = cnn.TrainConfig(max_epochs=3, seed=7)
    m1, log1 = cnn.train(x, y, SMALL_SPEC, cfg)
    m2, log2 = cnn.train(x, y, SMALL_SPEC, cfg)
    assert np.array_equal(m1.params["dense_w"], m2.params["dense_w"])
    assert log1 == log2


def test_early_stopping_counts_strikes():
    # zero learning rate freezes the weights; only the batch-norm
    # running averages drift, so validation loss settles and the
    # patience counter runs out well before the epoch budget
    x, y = _blobs(60)
    cfg = cnn.TrainConfig(learning_rate=0.0, max_epochs=50, patience=3, seed=2)
    _, log = cnn.train(x, y, SMALL_SPEC, cfg)
    assert len(log) < cfg.max_epochs
    best = int(np.argmin([row["val_loss"] for row in log]))
    assert len(log) - 1 - best == cfg.patience


def test_predict_probabilities_and_shape_guard():
    x, y = _blobs(60)
    model, _ = cnn.train(x, y, SMALL_SPEC, cnn.TrainConfig(max_epochs=5, seed=3))
    label, probs = cnn.predict(model, x[0])
    assert probs.shape == (2,)
    assert np.isclose(probs.sum(), 1.0)
    assert np.all(probs > 0)
    assert label == int(np.argmax(probs))
    with pytest.raises(ValueError):
        cnn.predict(model, x[0][:-1])


def test_evaluate_confusion_and_per_snr():
    x, y = _blobs(60)
    model, _ = cnn.train(x, y, SMALL_SPEC, cnn.TrainConfig(max_epochs=5, seed=4))
    tags = np.tile([10.0, 20.0], len(y) // 2)
    report = cnn.evaluate(model, x, y, snr_tags=tags)
    conf = report["confusion"]
    assert conf.sum() == len(y)
    assert np.array_equal(conf.sum(axis=1), np.bincount(y, minlength=2))
    assert report["accuracy"] == conf.trace() / len(y)
    assert set(report["per_snr"]) == {10.0, 20.0}
    assert len(report["predictions"]) == len(y)


def test_gradient_check_small_network():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 16))
    y = np.array([0, 2])
    spec = cnn.CnnSpec(n_classes=3, input_len=16, rows=4)
    err = cnn.gradient_check(spec, x, y, n_params=150, seed=5)
    assert err < 1e-4
    with pytest.raises(ValueError):
        cnn.gradient_check(spec, rng.standard_normal((5, 16)),
                           np.zeros(5, dtype=int))


def test_checkpoint_round_trip(tmp_path):
    x, y = _blobs(60)
    model, _ = cnn.train(x, y, SMALL_SPEC, cnn.TrainConfig(max_epochs=3, seed=6))
    path = tmp_path / "model.bin"
    cnn.save_model(model, path)
    loaded = cnn.load_model(path)
    assert loaded.spec == model.spec
    for k, v in model.params.items():
        assert np.array_equal(loaded.params[k], v)
    for k, v in model.running.items():
        assert np.array_equal(loaded.running[k], v)
    label_a, probs_a = cnn.predict(model, x[0])
    label_b, probs_b = cnn.predict(loaded, x[0])
    assert label_a == label_b
    assert np.array_equal(probs_a, probs_b)
    junk = tmp_path / "junk.bin"
    junk.write_bytes(json.dumps({"format": "other"}).encode() + b"\n")
    with pytest.raises(ValueError):
        cnn.load_model(junk)


def test_training_log_csv(tmp_path):
    log = [{"epoch": 0, "train_loss": 1.25, "val_loss": 1.5, "val_acc": 0.5},
           {"epoch": 1, "train_loss": 0.75, "val_loss": 1.0, "val_acc": 0.75}]
    path = tmp_path / "log.csv"
    cnn.write_training_log(log, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "epoch,train_loss,val_loss,val_acc"
    assert len(lines) == 3
    assert float(lines[2].split(",")[1]) == 0.75


def test_nearest_centroid_baseline():
    feats = np.array([[0.0, 0.0], [2.0, 0.0], [10.0, 0.0], [12.0, 0.0]])
    labels = np.array([0, 0, 1, 1])
    cents = cnn.nearest_centroid_train(feats, labels)
    assert np.array_equal(cents, [[1.0, 0.0], [11.0, 0.0]])
    assert np.array_equal(cnn.nearest_centroid_predict(cents, feats), labels)
    tie = cnn.nearest_centroid_predict(cents, np.array([[6.0, 0.0]]))
    assert tie[0] == 0
    x, y = _blobs(40)
    cents = cnn.nearest_centroid_train(x[:60], y[:60])
    assert np.mean(cnn.nearest_centroid_predict(cents, x[60:]) == y[60:]) == 1.0
