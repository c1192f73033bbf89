"""1-D convolutional autoencoder that squeezes a feature group into one channel.

Convolutions run along the day axis (stride 1, zero "same" padding) and
reduce channels following ``channel_plan``, e.g. 100 -> 16 -> 1 for the
encoder, mirrored as 1 -> 16 -> 100 for the decoder. ReLU follows every
layer except the bottleneck and the reconstruction output, both linear.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from newsload.errors import CheckpointVersionMismatch, NonFiniteLoss, ShapeMismatch
from newsload.optim import AdamState, EarlyStopping, adam_update

CHECKPOINT_VERSION = 1


@dataclass
class AEConfig:
    channel_plan: tuple | None = None  # default (C, 16, 1)
    kernel_width: int = 3
    lr: float = 1e-3
    batch: int = 4
    chunk_days: int = 28
    patience: int = 20
    max_epochs: int = 1000
    seed: int = 0
    val_fraction: float = 0.1


@dataclass
class AutoencoderModel:
    channel_plan: tuple
    kernel_width: int
    encoder: list  # [(weights (out, in, k), bias (out,)), ...]
    decoder: list
    seed: int = 0
    train_loss: float = math.nan
    val_loss: float = math.nan
    code_mean: float = 0.0
    code_sd: float = 1.0
    log: list = field(default_factory=list)

    def __post_init__(self):
        plan = tuple(int(c) for c in self.channel_plan)
        self.channel_plan = plan
        if plan[-1] != 1:
            raise ValueError("innermost representation must have one channel")
        enc = [(w.shape[1], w.shape[0]) for w, _ in self.encoder]
        dec = [(w.shape[1], w.shape[0]) for w, _ in self.decoder]
        if enc != list(zip(plan[:-1], plan[1:])) or dec != [(b, a) for a, b in reversed(enc)]:
            raise ValueError("encoder/decoder shapes do not mirror the channel plan")

    @property
    def layers(self):
        return list(self.encoder) + list(self.decoder)


def init_model(channel_plan, kernel_width=3, seed=0):
    """Glorot-uniform weights (fan counts include the kernel width), zero biases."""
    rng = np.random.default_rng(seed)
    plan = tuple(channel_plan)
    shapes = list(zip(plan[:-1], plan[1:]))
    shapes += [(b, a) for a, b in reversed(shapes)]
    layers = []
    for cin, cout in shapes:
        lim = math.sqrt(6.0 / ((cin + cout) * kernel_width))
        layers.append((rng.uniform(-lim, lim, (cout, cin, kernel_width)), np.zeros(cout)))
    n = len(plan) - 1
    return AutoencoderModel(plan, kernel_width, layers[:n], layers[n:], seed)


def _cols(a, k):
    """(N, C, T) -> (N, k, C, T) shifted copies of the zero-padded input."""
    p = (k - 1) // 2
    ap = np.pad(a, ((0, 0), (0, 0), (p, k - 1 - p)))
    T = a.shape[2]
    return np.stack([ap[:, :, j : j + T] for j in range(k)], axis=1)


def conv1d(a, w, b):
    return np.einsum("oik,nkit->not", w, _cols(a, w.shape[2]), optimize=True) + b[None, :, None]


def _activations(layers, n_enc):
    """Which layer outputs pass through ReLU."""
    n = len(layers)
    return [j != n_enc - 1 and j != n - 1 for j in range(n)]


def _run(layers, x, relu_flags):
    acts = [x]
    pre = []
    for (w, b), relu in zip(layers, relu_flags):
        z = conv1d(acts[-1], w, b)
        pre.append(z)
        acts.append(np.maximum(z, 0.0) if relu else z)
    return acts, pre


def _as_batch(model, window):
    x = np.asarray(window, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.channel_plan[0]:
        raise ShapeMismatch(f"expected (days, {model.channel_plan[0]}) input, got {x.shape}")
    return x.T[None]


def encode(model, window):
    """Compress (T days, C) to (T days, 1)."""
    x = _as_batch(model, window)
    flags = _activations(model.encoder, len(model.encoder))
    acts, _ = _run(model.encoder, x, flags)
    return acts[-1][0].T


def decode(model, code):
    code = np.asarray(code, dtype=float).reshape(-1, 1)
    flags = _activations(model.layers, len(model.encoder))[len(model.encoder):]
    acts, _ = _run(model.decoder, code.T[None], flags)
    return acts[-1][0].T


def reconstruct(model, window):
    return decode(model, encode(model, window))


def compress(model, data):
    """Encoded channel, z-scored with the statistics stored at training time."""
    return (encode(model, data)[:, 0] - model.code_mean) / model.code_sd


def loss_and_grad(model, batch):
    """MSE reconstruction loss of a (N, C, T) batch and per-layer gradients."""
    layers = model.layers
    flags = _activations(layers, len(model.encoder))
    acts, pre = _run(layers, batch, flags)
    diff = acts[-1] - batch
    loss = float(np.mean(diff**2))
    d = 2.0 * diff / diff.size
    grads = [None] * len(layers)
    for j in range(len(layers) - 1, -1, -1):
        w, _ = layers[j]
        if flags[j]:
            d = d * (pre[j] > 0)
        cols = _cols(acts[j], w.shape[2])
        gw = np.einsum("not,nkit->oik", d, cols, optimize=True)
        grads[j] = (gw, d.sum(axis=(0, 2)))
        if j:
            dcols = np.einsum("oik,not->nkit", w, d, optimize=True)
            k = w.shape[2]
            p = (k - 1) // 2
            T = d.shape[2]
            dap = np.zeros((d.shape[0], w.shape[1], T + k - 1))
            for s in range(k):
                dap[:, :, s : s + T] += dcols[:, s]
            d = dap[:, :, p : p + T]
    return loss, grads


def _chunks(data, length, k):
    out = [data[s : s + length] for s in range(0, len(data), length)]
    return [c for c in out if len(c) >= k]


def _flat(layers):
    return {f"{j}{t}": arr for j, (w, b) in enumerate(layers) for t, arr in (("w", w), ("b", b))}


def _unflat(d, n):
    return [(d[f"{j}w"], d[f"{j}b"]) for j in range(n)]


def train_autoencoder(data, config: AEConfig | None = None) -> AutoencoderModel:
    """Fit the autoencoder on a (days, C) table with Adam and early stopping.

    The last ``val_fraction`` of days is the validation set; the training
    days are cut into ``chunk_days`` sequences visited in order. Returns the
    best-validation checkpoint, epoch 0 (initial weights) included.
    """
    cfg = config or AEConfig()
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or len(data) < 20:
        raise ValueError("need a (days >= 20, channels) table")
    plan = tuple(cfg.channel_plan) if cfg.channel_plan else (data.shape[1], 16, 1)
    if plan[0] != data.shape[1]:
        raise ShapeMismatch(f"channel plan starts at {plan[0]} but data has {data.shape[1]} channels")
    model = init_model(plan, cfg.kernel_width, cfg.seed)
    n_val = max(cfg.kernel_width, int(round(cfg.val_fraction * len(data))))
    train_part, val_part = data[:-n_val], data[-n_val:]
    chunks = [c.T for c in _chunks(train_part, cfg.chunk_days, cfg.kernel_width)]
    val = val_part.T[None]
    n_layers = len(model.layers)

    def evaluate(m):
        return loss_and_grad(m, val)[0]

    def with_layers(layers):
        n = len(model.encoder)
        return AutoencoderModel(plan, cfg.kernel_width, layers[:n], layers[n:], cfg.seed)

    state = AdamState(lr=cfg.lr)
    stopper = EarlyStopping(cfg.patience)
    current = model
    best = model
    stopper.update(evaluate(model), 0)
    best_train = float(np.mean([loss_and_grad(model, c[None])[0] for c in chunks]))
    model.log.append({"epoch": 0, "train_loss": best_train, "val_loss": stopper.best})
    log = model.log
    for epoch in range(1, cfg.max_epochs + 1):
        total, count = 0.0, 0
        for s in range(0, len(chunks), cfg.batch):
            group = chunks[s : s + cfg.batch]
            # equal-length chunks batch together; a short tail chunk runs alone
            for length in sorted({c.shape[1] for c in group}, reverse=True):
                batch = np.stack([c for c in group if c.shape[1] == length])
                loss, grads = loss_and_grad(current, batch)
                if not math.isfinite(loss):
                    raise NonFiniteLoss(epoch)
                params = adam_update(state, _flat(current.layers), _flat(grads))
                current = with_layers(_unflat(params, n_layers))
                total += loss * batch.size
                count += batch.size
        vl = evaluate(current)
        if not math.isfinite(vl):
            raise NonFiniteLoss(epoch, "validation loss is not finite")
        if stopper.update(vl, epoch):
            best = current
            best_train = total / count
        log.append({"epoch": epoch, "train_loss": total / count, "val_loss": vl})
        if stopper.stop:
            break
    best.log = log
    best.train_loss = best_train
    best.val_loss = stopper.best
    code = encode(best, train_part)[:, 0]
    best.code_mean = float(code.mean())
    best.code_sd = float(code.std()) or 1.0
    return best


def model_to_dict(model):
    return {
        "version": CHECKPOINT_VERSION,
        "channel_plan": list(model.channel_plan),
        "kernel_width": model.kernel_width,
        "layers": [
            {"shape": list(w.shape), "weights": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in model.layers
        ],
        "seed": model.seed,
        "train_loss": model.train_loss,
        "val_loss": model.val_loss,
        "code_mean": model.code_mean,
        "code_sd": model.code_sd,
    }


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionMismatch("unsupported autoencoder checkpoint")
    try:
        layers = [
            (np.array(l["weights"], dtype=float).reshape(l["shape"]), np.array(l["bias"], dtype=float))
            for l in d["layers"]
        ]
        n = len(d["channel_plan"]) - 1
        return AutoencoderModel(
            tuple(d["channel_plan"]), int(d["kernel_width"]), layers[:n], layers[n:],
            int(d.get("seed", 0)), float(d.get("train_loss", math.nan)), float(d.get("val_loss", math.nan)),
            float(d.get("code_mean", 0.0)), float(d.get("code_sd", 1.0)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointVersionMismatch(f"malformed autoencoder checkpoint: {exc}") from None


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return model_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointVersionMismatch(f"cannot read checkpoint {path}: {exc}") from None
