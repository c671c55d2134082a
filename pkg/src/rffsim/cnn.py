"""From-scratch convolutional classifier trained with Adam.

Two conv(3x3) + batch-norm + ReLU + max-pool blocks feed a softmax
dense layer.  Forward pass, backpropagation, the optimizer and early
stopping are all plain numpy in double precision, so the analytic
gradients can be audited against central finite differences.  A
nearest-centroid baseline is included as a classifier-independent
sanity check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BN_MOMENTUM = 0.9
BN_EPSILON = 1e-5
CHECKPOINT_FORMAT = "rffsim-cnn"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class CnnSpec:
    """Architecture of the fixed two-block convolutional network."""

    n_classes: int
    input_len: int = 320
    rows: int = 16
    conv_filters: tuple[int, int] = (32, 64)

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if self.rows < 4 or self.input_len % self.rows:
            raise ValueError("rows must divide the feature length")
        if self.rows % 4 or self.cols % 4:
            raise ValueError("both input dimensions must survive two 2x2 pools")

    @property
    def cols(self) -> int:
        return self.input_len // self.rows

    @property
    def flat_len(self) -> int:
        return (self.rows // 4) * (self.cols // 4) * self.conv_filters[1]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for `train`."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 5
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("validation fraction must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch size, epochs and patience must be positive")


@dataclass
class Model:
    """Trained network: parameters plus batch-norm running statistics."""

    spec: CnnSpec
    params: dict
    running: dict


def reshape_feature(vec: np.ndarray, rows: int = 16) -> np.ndarray:
    """Reshape a flat feature vector to the 2-d network input, row-major."""
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.size % rows:
        raise ValueError(f"feature length {vec.size} does not fill {rows} rows")
    return vec.reshape(rows, vec.size // rows)


# parameter initialization

def init_params(spec: CnnSpec, rng: np.random.Generator) -> dict:
    """Fan-in-scaled uniform weights; batch-norm starts as the identity."""
    f1, f2 = spec.conv_filters

    def uniform(shape, fan_in):
        limit = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-limit, limit, size=shape)

    return {
        "conv1_w": uniform((f1, 1, 3, 3), 9),
        "conv1_b": np.zeros(f1),
        "bn1_gamma": np.ones(f1),
        "bn1_beta": np.zeros(f1),
        "conv2_w": uniform((f2, f1, 3, 3), f1 * 9),
        "conv2_b": np.zeros(f2),
        "bn2_gamma": np.ones(f2),
        "bn2_beta": np.zeros(f2),
        "dense_w": uniform((spec.flat_len, spec.n_classes), spec.flat_len),
        "dense_b": np.zeros(spec.n_classes),
    }


def init_running(spec: CnnSpec) -> dict:
    f1, f2 = spec.conv_filters
    return {
        "bn1_mean": np.zeros(f1), "bn1_var": np.ones(f1),
        "bn2_mean": np.zeros(f2), "bn2_var": np.ones(f2),
    }


# layer primitives

_PATCH_IDX_CACHE: dict = {}


def _patch_indices(h: int, w: int) -> np.ndarray:
    """Flat gather indices of all 3x3 same-padding patches, shape (h*w, 9)."""
    key = (h, w)
    if key not in _PATCH_IDX_CACHE:
        pw = w + 2
        ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        r = ii[:, :, None, None] + np.arange(3)[None, None, :, None]
        c = jj[:, :, None, None] + np.arange(3)[None, None, None, :]
        _PATCH_IDX_CACHE[key] = (r * pw + c).reshape(h * w, 9)
    return _PATCH_IDX_CACHE[key]


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    n, c, h, wd = x.shape
    f = w.shape[0]
    xp = np.zeros((n, c, h + 2, wd + 2))
    xp[:, :, 1:-1, 1:-1] = x
    cols = xp.reshape(n, c, -1)[:, :, _patch_indices(h, wd)]
    cols = cols.transpose(0, 2, 1, 3).reshape(n, h * wd, c * 9)
    out = cols @ w.reshape(f, c * 9).T + b
    return out.transpose(0, 2, 1).reshape(n, f, h, wd), cols


def _conv_backward(dout: np.ndarray, cols: np.ndarray, w: np.ndarray):
    n, f, h, wd = dout.shape
    c = w.shape[1]
    dflat = dout.reshape(n, f, h * wd).transpose(0, 2, 1)
    dw = (dflat.reshape(-1, f).T @ cols.reshape(-1, c * 9)).reshape(w.shape)
    db = dflat.sum(axis=(0, 1))
    # input gradient of a same-padded conv is the conv with the kernel
    # rotated 180 degrees and in/out channels swapped
    w_flip = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx, _ = _conv_forward(dout, w_flip, np.zeros(c))
    return dx, dw, db


def _bn_forward(x, gamma, beta, running_mean, running_var, train, update_running):
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if update_running:
            running_mean *= BN_MOMENTUM
            running_mean += (1.0 - BN_MOMENTUM) * mean
            running_var *= BN_MOMENTUM
            running_var += (1.0 - BN_MOMENTUM) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv_std, gamma)


def _bn_backward(dout, cache):
    xhat, inv_std, gamma = cache
    m = dout.shape[0] * dout.shape[2] * dout.shape[3]
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    dx = (inv_std[None, :, None, None] / m) * (
        m * dxhat
        - dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        - xhat * (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
    )
    return dx, dgamma, dbeta


def _pool_forward(x):
    n, c, h, w = x.shape
    xr = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    xr = xr.reshape(n, c, h // 2, w // 2, 4)
    idx = xr.argmax(axis=-1)
    return np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0], (idx, x.shape)


def _pool_backward(dout, cache):
    idx, shape = cache
    n, c, h, w = shape
    dxr = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(dxr, idx[..., None], dout[..., None], axis=-1)
    dxr = dxr.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dxr.reshape(n, c, h, w)


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(params, running, x, train, update_running=False):
    """Run the network; returns logits and the caches backward needs."""
    caches = {}
    out, caches["cols1"] = _conv_forward(x, params["conv1_w"], params["conv1_b"])
    out, caches["bn1"] = _bn_forward(
        out, params["bn1_gamma"], params["bn1_beta"],
        running["bn1_mean"], running["bn1_var"], train, update_running)
    caches["relu1"] = out > 0
    out = out * caches["relu1"]
    out, caches["pool1"] = _pool_forward(out)
    out, caches["cols2"] = _conv_forward(out, params["conv2_w"], params["conv2_b"])
    out, caches["bn2"] = _bn_forward(
        out, params["bn2_gamma"], params["bn2_beta"],
        running["bn2_mean"], running["bn2_var"], train, update_running)
    caches["relu2"] = out > 0
    out = out * caches["relu2"]
    out, caches["pool2"] = _pool_forward(out)
    caches["flat_shape"] = out.shape
    flat = out.reshape(out.shape[0], -1)
    caches["flat"] = flat
    logits = flat @ params["dense_w"] + params["dense_b"]
    return logits, caches


def _backward(params, caches, dlogits):
    grads = {}
    grads["dense_w"] = caches["flat"].T @ dlogits
    grads["dense_b"] = dlogits.sum(axis=0)
    dflat = dlogits @ params["dense_w"].T
    dout = dflat.reshape(caches["flat_shape"])
    dout = _pool_backward(dout, caches["pool2"])
    dout = dout * caches["relu2"]
    dout, grads["bn2_gamma"], grads["bn2_beta"] = _bn_backward(dout, caches["bn2"])
    dout, grads["conv2_w"], grads["conv2_b"] = _conv_backward(
        dout, caches["cols2"], params["conv2_w"])
    dout = _pool_backward(dout, caches["pool1"])
    dout = dout * caches["relu1"]
    dout, grads["bn1_gamma"], grads["bn1_beta"] = _bn_backward(dout, caches["bn1"])
    _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(
        dout, caches["cols1"], params["conv1_w"])
    return grads


def _loss_and_grads(params, running, x, labels, update_running=False):
    logits, caches = _forward(params, running, x, train=True,
                              update_running=update_running)
    probs = _softmax(logits)
    n = len(labels)
    loss = -np.mean(np.log(probs[np.arange(n), labels] + 1e-300))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, _backward(params, caches, dlogits)


def _batched_logits(model: Model, x: np.ndarray, batch: int = 256) -> np.ndarray:
    outs = []
    for i in range(0, len(x), batch):
        logits, _ = _forward(model.params, model.running, x[i:i + batch], train=False)
        outs.append(logits)
    return np.concatenate(outs)


def _to_tensor(features: np.ndarray, rows: int) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    n, length = features.shape
    return features.reshape(n, 1, rows, length // rows)


def train(features: np.ndarray, labels: np.ndarray, spec: CnnSpec,
          cfg: TrainConfig) -> tuple[Model, list[dict]]:
    """Train the network with Adam and early stopping.

    Parameters
    ----------
    features : ndarray, shape (N, input_len)
        Real feature vectors.
    labels : ndarray, shape (N,)
        Integer class labels in [0, n_classes).
    spec, cfg : CnnSpec, TrainConfig
        Architecture and optimization settings.

    Returns
    -------
    (Model, list of dict)
        The weights of the best-validation-loss epoch and the per-epoch
        training log (epoch, train_loss, val_loss, val_acc).

    Raises
    ------
    TrainingDiverged
        If any batch loss stops being finite.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = len(features)
    if n != len(labels):
        raise ValueError("feature/label count mismatch")
    if n < cfg.batch_size:
        raise ValueError("need at least one full batch of samples")
    if len(np.unique(labels)) < 2:
        raise ValueError("need at least two classes in the training data")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_val = _to_tensor(features[val_idx], spec.rows)
    y_val = labels[val_idx]
    x_train = _to_tensor(features[train_idx], spec.rows)
    y_train = labels[train_idx]

    params = init_params(spec, rng)
    running = init_running(spec)
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best = None
    best_val = np.inf
    strikes = 0
    log = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(y_train))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            loss, grads = _loss_and_grads(params, running, x_train[sel],
                                          y_train[sel], update_running=True)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            epoch_loss += loss * len(sel)
            step += 1
            for k, g in grads.items():
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * g
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * g * g
                m_hat = adam_m[k] / (1 - beta1 ** step)
                v_hat = adam_v[k] / (1 - beta2 ** step)
                params[k] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        model = Model(spec=spec, params=params, running=running)
        val_logits = _batched_logits(model, x_val)
        val_probs = _softmax(val_logits)
        val_loss = -float(np.mean(np.log(
            val_probs[np.arange(len(y_val)), y_val] + 1e-300)))
        val_acc = float(np.mean(val_logits.argmax(axis=1) == y_val))
        log.append({
            "epoch": epoch,
            "train_loss": epoch_loss / len(y_train),
            "val_loss": val_loss,
            "val_acc": val_acc,
        })
        if val_loss < best_val:
            best_val = val_loss
            best = ({k: v.copy() for k, v in params.items()},
                    {k: v.copy() for k, v in running.items()})
            strikes = 0
        else:
            strikes += 1
            if strikes >= cfg.patience:
                break
    params, running = best
    return Model(spec=spec, params=params, running=running), log


def predict(model: Model, vec: np.ndarray) -> tuple[int, np.ndarray]:
    """Classify one feature vector; returns (label, probability vector)."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (model.spec.input_len,):
        raise ValueError(f"expected feature length {model.spec.input_len}")
    x = _to_tensor(vec[None, :], model.spec.rows)
    logits, _ = _forward(model.params, model.running, x, train=False)
    probs = _softmax(logits)[0]
    return int(np.argmax(probs)), probs


def evaluate(model: Model, features: np.ndarray, labels: np.ndarray,
             snr_tags: np.ndarray | None = None) -> dict:
    """Accuracy, confusion matrix, and per-SNR accuracy on labeled data."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    x = _to_tensor(features, model.spec.rows)
    pred = _batched_logits(model, x).argmax(axis=1)
    nc = model.spec.n_classes
    confusion = np.zeros((nc, nc), dtype=int)
    np.add.at(confusion, (labels, pred), 1)
    report = {
        "accuracy": float(np.mean(pred == labels)),
        "confusion": confusion,
        "predictions": pred,
    }
    if snr_tags is not None:
        snr_tags = np.asarray(snr_tags, dtype=float)
        report["per_snr"] = {
            float(s): float(np.mean(pred[snr_tags == s] == labels[snr_tags == s]))
            for s in np.unique(snr_tags)
        }
    return report


def gradient_check(spec: CnnSpec, features: np.ndarray, labels: np.ndarray,
                   n_params: int = 200, step: float = 1e-5,
                   seed: int = 0) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Batch-norm runs on batch statistics (training mode) without touching
    the running averages, so the loss is a deterministic function of the
    parameters and the finite-difference probe is exact.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if len(features) > 4:
        raise ValueError("gradient check expects a small batch (<= 4)")
    x = _to_tensor(features, spec.rows)
    rng = np.random.default_rng(seed)
    params = init_params(spec, rng)
    running = init_running(spec)
    _, grads = _loss_and_grads(params, running, x, labels)

    names = sorted(params)
    sizes = np.array([params[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    picks = rng.choice(offsets[-1], size=min(n_params, offsets[-1]), replace=False)
    worst = 0.0
    for flat_i in picks:
        sel = int(np.searchsorted(offsets, flat_i, side="right") - 1)
        name = names[sel]
        idx = np.unravel_index(flat_i - offsets[sel], params[name].shape)
        orig = params[name][idx]
        params[name][idx] = orig + step
        up, _ = _loss_and_grads(params, running, x, labels)
        params[name][idx] = orig - step
        down, _ = _loss_and_grads(params, running, x, labels)
        params[name][idx] = orig
        numeric = (up - down) / (2 * step)
        analytic = grads[name][idx]
        err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-12)
        worst = max(worst, err)
    return worst


def save_model(model: Model, path) -> None:
    """Write a checkpoint: one JSON header line + little-endian float64."""
    arrays = [(k, model.params[k]) for k in sorted(model.params)]
    arrays += [(k, model.running[k]) for k in sorted(model.running)]
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_classes": model.spec.n_classes,
        "input_len": model.spec.input_len,
        "rows": model.spec.rows,
        "conv_filters": list(model.spec.conv_filters),
        "arrays": [[k, list(v.shape)] for k, v in arrays],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, v in arrays:
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_model(path) -> Model:
    """Read a checkpoint written by save_model."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a model checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        spec = CnnSpec(n_classes=header["n_classes"],
                       input_len=header["input_len"], rows=header["rows"],
                       conv_filters=tuple(header["conv_filters"]))
        params, running = {}, {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape))
            arr = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
            (running if name.startswith("bn") and name.endswith(("mean", "var"))
             else params)[name] = arr
    return Model(spec=spec, params=params, running=running)


def write_training_log(log: list[dict], path) -> None:
    """Persist the per-epoch log as CSV (epoch, train_loss, val_loss, val_acc)."""
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,val_acc\n")
        for row in log:
            fh.write(f"{row['epoch']},{row['train_loss']:.8f},"
                     f"{row['val_loss']:.8f},{row['val_acc']:.6f}\n")


def nearest_centroid_train(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Class centroids in feature space, ordered by class label 0..C-1."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    classes = np.arange(labels.max() + 1)
    return np.array([features[labels == c].mean(axis=0) for c in classes])


def nearest_centroid_predict(centroids: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Nearest centroid by L2; distance ties go to the lowest label."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    d2 = ((features[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)
