"""LSTM day-ahead forecaster with a fully-connected head.

The recurrent cell follows the usual gate equations::

    i = sig(W_i x + U_i h + b_i)    f = sig(W_f x + U_f h + b_f)
    o = sig(W_o x + U_o h + b_o)    g = tanh(W_c x + U_c h + b_c)
    c' = f * c + i * g              h' = o * tanh(c')

Gate weights are stored stacked as ``W`` (4H, F), ``U`` (4H, H) and
``b`` (4H,) in the order i, f, o, g. The head maps the final hidden state
to 48 point values or ``Q x 48`` quantile values. Training works in
z-scored units; normalisation statistics travel with the model.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from newsload import kernels
from newsload.errors import (
    CheckpointVersionMismatch,
    NonFiniteGradient,
    NonFiniteLoss,
    ShapeMismatch,
    TooFewWindows,
)
from newsload.optim import AdamState, EarlyStopping, adam_update
from newsload.timeseries import HORIZON, LAG_STEPS, stack_windows

CHECKPOINT_VERSION = 1
HIDDEN = 24
DECILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
WIDE_QUANTILES = (0.05,) + DECILES + (0.95,)
PARAM_NAMES = ("W", "U", "b", "V", "c")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class TrainConfig:
    mode: str = "point"
    batch: int = 4
    lr: float = 1e-4
    patience: int = 10
    max_epochs: int = 500
    seed: int = 0
    hidden: int = HIDDEN
    quantiles: tuple = DECILES
    val_fraction: float = 0.1
    backend: str | None = None


@dataclass
class LstmModel:
    params: dict
    mode: str
    quantiles: tuple
    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float
    y_sd: float
    feature_names: tuple = ()
    seed: int = 0
    log: list = field(default_factory=list)
    residual_sd: np.ndarray | None = None

    @property
    def input_dim(self):
        return self.params["W"].shape[1]

    @property
    def hidden_dim(self):
        return self.params["U"].shape[1]

    @property
    def output_dim(self):
        return self.params["V"].shape[0]

    def normalize(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_dim or X.shape[-2] != LAG_STEPS:
            raise ShapeMismatch(
                f"lag block shape {X.shape[-2:]} does not match ({LAG_STEPS}, {self.input_dim})"
            )
        return (X - self.x_mean) / self.x_sd


def init_params(input_dim, hidden, output_dim, seed):
    """Uniform(+-sqrt(1/H)) weights, forget-gate bias 1, zero head bias."""
    rng = np.random.default_rng(seed)
    k = math.sqrt(1.0 / hidden)
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return {
        "W": rng.uniform(-k, k, (4 * hidden, input_dim)),
        "U": rng.uniform(-k, k, (4 * hidden, hidden)),
        "b": b,
        "V": rng.uniform(-k, k, (output_dim, hidden)),
        "c": np.zeros(output_dim),
    }


def lstm_step(params, x_t, h_prev, c_prev):
    """Single cell update; returns ``(h_t, c_t)``."""
    H = params["U"].shape[1]
    z = params["W"] @ x_t + params["U"] @ h_prev + params["b"]
    i = sigmoid(z[:H])
    f = sigmoid(z[H : 2 * H])
    o = sigmoid(z[2 * H : 3 * H])
    g = np.tanh(z[3 * H :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _forward(params, Xn, backend=None):
    """Normalised forward pass over a batch (B, T, F) -> (B, O) plus cache."""
    kern = kernels.get_backend(backend)
    zx = np.ascontiguousarray(Xn @ params["W"].T + params["b"])
    hs, cs, gates, tcs = kern.recurrence_forward(zx, params["U"])
    out = hs[:, -1, :] @ params["V"].T + params["c"]
    return out, (hs, cs, gates, tcs)


def mse_loss(pred, target):
    pred = np.asarray(pred, dtype=float)
    return float(np.mean((pred - np.asarray(target, dtype=float)) ** 2))


def pinball_loss(pred, target, quantiles):
    """Mean pinball loss over all (quantile, slot) pairs.

    ``pred`` has shape (Q, S) (or (B, Q, S) with ``target`` (B, S)).
    """
    q = np.asarray(quantiles, dtype=float)
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    u = target[..., None, :] - pred
    q = q.reshape((len(q), 1))
    return float(np.mean(np.maximum(q * u, (q - 1.0) * u)))


def _loss_and_dout(out, Yn, mode, quantiles):
    B = out.shape[0]
    if mode == "point":
        diff = out - Yn
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    Q = len(quantiles)
    pred = out.reshape(B, Q, -1)
    u = Yn[:, None, :] - pred
    q = np.asarray(quantiles).reshape(1, Q, 1)
    loss = float(np.mean(np.maximum(q * u, (q - 1.0) * u)))
    d = np.where(u > 0, -q, np.where(u < 0, 1.0 - q, 0.0)) / u.size
    return loss, d.reshape(B, -1)


def loss_and_grad(params, Xn, Yn, mode="point", quantiles=DECILES, backend=None):
    """Batch-mean loss and its exact gradient by backpropagation through time."""
    out, (hs, cs, gates, tcs) = _forward(params, Xn, backend)
    loss, dout = _loss_and_dout(out, Yn, mode, quantiles)
    hT = hs[:, -1, :]
    grads = {"V": dout.T @ hT, "c": dout.sum(axis=0)}
    dh = dout @ params["V"]
    kern = kernels.get_backend(backend)
    dz = kern.recurrence_backward(params["U"], cs, gates, tcs, np.ascontiguousarray(dh))
    B, T, G = dz.shape
    dz2 = dz.reshape(B * T, G)
    grads["W"] = dz2.T @ Xn.reshape(B * T, -1)
    grads["U"] = dz2.T @ hs[:, :-1, :].reshape(B * T, -1)
    grads["b"] = dz2.sum(axis=0)
    return loss, grads


def backward(model, windows, loss="point"):
    """Gradients of the batch-mean loss for a list of windows (model units)."""
    if not windows:
        raise ValueError("batch must be non-empty")
    X, Y, _ = stack_windows(windows)
    Xn = model.normalize(X)
    Yn = (Y - model.y_mean) / model.y_sd
    _, grads = loss_and_grad(model.params, Xn, Yn, loss, model.quantiles)
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFiniteGradient("gradient contains non-finite values")
    return grads


def forward(model, lag_block):
    """Raw head output for one raw lag block, in demand units."""
    out, _ = _forward(model.params, model.normalize(lag_block)[None])
    return out[0] * model.y_sd + model.y_mean


def _split(n, val_fraction):
    n_val = max(1, int(round(val_fraction * n)))
    return n - n_val


def train(windows, config: TrainConfig | None = None, progress=None) -> LstmModel:
    """Fit an LSTM on chronologically ordered windows.

    The last ``val_fraction`` of windows is held out for early stopping;
    batches run in fixed chronological order. Returns the best-validation
    checkpoint (the initial weights count as epoch 0).
    """
    cfg = config or TrainConfig()
    if len(windows) < 10:
        raise TooFewWindows(f"need at least 10 windows, got {len(windows)}")
    X, Y, _ = stack_windows(windows)
    n_train = _split(len(X), cfg.val_fraction)
    Xtr, Ytr, Xva, Yva = X[:n_train], Y[:n_train], X[n_train:], Y[n_train:]

    x_mean = Xtr.reshape(-1, X.shape[2]).mean(axis=0)
    x_sd = Xtr.reshape(-1, X.shape[2]).std(axis=0)
    x_sd[x_sd == 0] = 1.0
    y_mean = float(Ytr.mean())
    y_sd = float(Ytr.std()) or 1.0
    quantiles = tuple(cfg.quantiles) if cfg.mode == "quantile" else ()
    out_dim = HORIZON * (len(quantiles) if cfg.mode == "quantile" else 1)
    model = LstmModel(
        init_params(X.shape[2], cfg.hidden, out_dim, cfg.seed),
        cfg.mode, quantiles, x_mean, x_sd, y_mean, y_sd,
        tuple(windows[0].feature_names), cfg.seed,
    )
    Xtr_n = model.normalize(Xtr)
    Xva_n = model.normalize(Xva)
    Ytr_n = (Ytr - y_mean) / y_sd
    Yva_n = (Yva - y_mean) / y_sd

    def val_loss(params):
        out, _ = _forward(params, Xva_n, cfg.backend)
        return _loss_and_dout(out, Yva_n, cfg.mode, quantiles)[0]

    state = AdamState(lr=cfg.lr)
    stopper = EarlyStopping(cfg.patience)
    params = model.params
    best = {k: v.copy() for k, v in params.items()}
    stopper.update(val_loss(params), 0)
    model.log.append({"epoch": 0, "train_loss": None, "val_loss": stopper.best})
    for epoch in range(1, cfg.max_epochs + 1):
        total = 0.0
        for s in range(0, n_train, cfg.batch):
            loss, grads = loss_and_grad(
                params, Xtr_n[s : s + cfg.batch], Ytr_n[s : s + cfg.batch],
                cfg.mode, quantiles, cfg.backend,
            )
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch)
            params = adam_update(state, params, grads)
            total += loss * len(Xtr_n[s : s + cfg.batch])
        vl = val_loss(params)
        if not math.isfinite(vl):
            raise NonFiniteLoss(epoch, "validation loss is not finite")
        if stopper.update(vl, epoch):
            best = {k: v.copy() for k, v in params.items()}
        model.log.append({"epoch": epoch, "train_loss": total / n_train, "val_loss": vl})
        if progress is not None:
            progress(epoch, total / n_train, vl)
        if stopper.stop:
            break
    model.params = best
    if cfg.mode == "point":
        out, _ = _forward(best, Xva_n, cfg.backend)
        resid = out * y_sd + y_mean - Yva
        # root-mean-square per slot; robust when the validation set is tiny
        model.residual_sd = np.sqrt(np.mean(resid**2, axis=0))
    return model


@dataclass
class ForecastResult:
    anchor_day: np.datetime64
    point: np.ndarray
    quantiles: np.ndarray | None = None
    levels: tuple = ()


def sort_quantiles(q):
    """Enforce non-crossing by sorting each slot's quantile values."""
    return np.sort(np.asarray(q, dtype=float), axis=-2)


def predict_many(model, X, backend=None):
    """Predictions for stacked raw lag blocks (N, 336, F).

    Returns ``(point (N, 48), quantiles (N, Q, 48) or None)``.
    """
    out, _ = _forward(model.params, model.normalize(X), backend)
    out = out * model.y_sd + model.y_mean
    if model.mode == "point":
        return out, None
    q = sort_quantiles(out.reshape(len(out), len(model.quantiles), HORIZON))
    return q[:, model.quantiles.index(0.5), :].copy(), q


def predict(model, lag_block, anchor_day=None) -> ForecastResult:
    point, q = predict_many(model, np.asarray(lag_block)[None])
    return ForecastResult(anchor_day, point[0], None if q is None else q[0], tuple(model.quantiles))


def weekly_persistence(frame, anchors):
    """Naive forecast: day D+1 repeats day D-6 (same weekday, last observed week)."""
    daily = frame.daily(frame.target_name)
    idx = ((np.asarray(anchors, dtype="datetime64[D]") - frame.dates[0]).astype(int))
    return daily[idx - 6]


# ---------------------------------------------------------------- checkpoints


def model_to_dict(model):
    return {
        "version": CHECKPOINT_VERSION,
        "mode": model.mode,
        "dims": {"input": model.input_dim, "hidden": model.hidden_dim, "output": model.output_dim},
        "parameters": {k: model.params[k].ravel().tolist() for k in PARAM_NAMES},
        "normalization": {
            "x_mean": model.x_mean.tolist(),
            "x_sd": model.x_sd.tolist(),
            "y_mean": model.y_mean,
            "y_sd": model.y_sd,
        },
        "quantiles": list(model.quantiles),
        "feature_names": list(model.feature_names),
        "seed": model.seed,
        "residual_sd": None if model.residual_sd is None else model.residual_sd.tolist(),
        "training_log": model.log,
    }


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionMismatch(f"unsupported checkpoint version {d.get('version') if isinstance(d, dict) else d!r}")
    try:
        F, H, O = d["dims"]["input"], d["dims"]["hidden"], d["dims"]["output"]
        shapes = {"W": (4 * H, F), "U": (4 * H, H), "b": (4 * H,), "V": (O, H), "c": (O,)}
        params = {k: np.array(d["parameters"][k], dtype=float).reshape(shapes[k]) for k in PARAM_NAMES}
        norm = d["normalization"]
        rsd = d.get("residual_sd")
        return LstmModel(
            params, d["mode"], tuple(d["quantiles"]),
            np.array(norm["x_mean"]), np.array(norm["x_sd"]),
            float(norm["y_mean"]), float(norm["y_sd"]),
            tuple(d.get("feature_names", ())), int(d.get("seed", 0)), list(d.get("training_log", [])),
            None if rsd is None else np.array(rsd, dtype=float),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointVersionMismatch(f"malformed checkpoint: {exc}") from None


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointVersionMismatch(f"cannot read checkpoint {path}: {exc}") from None
    return model_from_dict(d)
