"""End-to-end orchestration shared by the CLI and the acceptance tests.

A *variant* such as ``LSTM-S-G-CG`` is the base feature set (demand,
temperature, holiday and calendar channels) plus the named text groups.
Granger screening and autoencoder fitting only ever see days before the
split date.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from newsload import autoencoder as ae
from newsload import forecaster as fc
from newsload.config import GROUP_LETTERS, RunConfig, parse_variant
from newsload.errors import ConfigError, NewsloadError
from newsload.granger import select_features
from newsload.ingest import generate_synthetic, load_directory
from newsload.metrics import compare_models, segment_report
from newsload.timeseries import SLOTS_PER_DAY, make_windows, stack_windows

log = logging.getLogger(__name__)

CG_COLUMN = "cg__embedding"


def load_frame(cfg: RunConfig):
    """Build the frame described by the config; returns ``(frame, ground_truth or None)``."""
    if cfg.synthetic:
        return generate_synthetic(cfg.synth)
    rng = (cfg.start_date, cfg.end_date) if cfg.start_date and cfg.end_date else None
    return load_directory(cfg.data_dir, rng), None


def resolve_split(frame, cfg):
    """Configured split date, or the day after the first 80% of days."""
    if cfg.split_date:
        split = np.datetime64(cfg.split_date, "D")
    else:
        split = frame.dates[0] + int(round(0.8 * frame.n_days))
    if not frame.dates[0] < split <= frame.dates[-1]:
        raise ConfigError(f"split date {split} outside data span {frame.dates[0]}..{frame.dates[-1]}")
    return split


def base_columns(frame):
    return [n for n in frame.names() if not frame.roles[n].startswith("text:")]


def _train_days(frame, split):
    return int((split - frame.dates[0]).astype(int))


def granger_screen(frame, names, split, cfg):
    """Granger test of daily text columns against daily-mean demand on training days."""
    n = _train_days(frame, split)
    demand = frame.daily_mean(frame.target_name)[:n]
    cols = [(name, frame.daily(name)[:n, 0]) for name in names]
    return select_features(cols, demand, cfg.granger_max_lag, cfg.granger_alpha, cfg.granger_bonferroni)


def fit_compressor(frame, split, cfg):
    """Train the autoencoder on the embedding group; returns ``(model, daily z-scored code)``."""
    names = frame.names("text:embedding")
    if not names:
        raise ConfigError("CG requires an embedding table")
    daily = np.stack([frame.daily(n)[:, 0] for n in names], axis=1)
    n = _train_days(frame, split)
    plan = tuple(cfg.ae_plan) if cfg.ae_plan else (len(names), 16, 1)
    model = ae.train_autoencoder(
        daily[:n],
        ae.AEConfig(plan, cfg.ae_kernel_width, cfg.ae_lr, cfg.ae_batch, cfg.ae_chunk_days,
                    cfg.ae_patience, cfg.ae_max_epochs, cfg.seed),
    )
    return model, ae.compress(model, daily)


def add_compressed(frame, compressor):
    names = frame.names("text:embedding")
    daily = np.stack([frame.daily(n)[:, 0] for n in names], axis=1)
    code = ae.compress(compressor, daily)
    return frame.with_columns({CG_COLUMN: np.repeat(code, SLOTS_PER_DAY)}, {CG_COLUMN: "text:cg"})


@dataclass
class VariantRun:
    name: str
    frame: object
    split: np.datetime64
    model: object = None
    compressor: object = None
    granger: list = field(default_factory=list)
    report: object = None


def prepare_variant(frame, variant, cfg, split):
    """Select the columns of one variant; returns a :class:`VariantRun` without a model."""
    groups = parse_variant(variant)
    keep = base_columns(frame)
    run = VariantRun(variant, None, split)
    text = []
    for g in groups:
        if g == "CG":
            continue
        names = frame.names("text:" + GROUP_LETTERS[g])
        if not names:
            raise ConfigError(f"variant {variant} needs the {GROUP_LETTERS[g]} group, which is absent")
        text += names
    if text and cfg.granger:
        run.granger = granger_screen(frame, text, split, cfg)
        chosen = [r.feature_name for r in run.granger if r.selected]
        log.info("%s: Granger kept %d of %d text columns", variant, len(chosen), len(text))
        text = chosen
    keep += text
    if "CG" in groups:
        run.compressor, _ = fit_compressor(frame, split, cfg)
        frame = add_compressed(frame, run.compressor)
        keep.append(CG_COLUMN)
    run.frame = frame.select(keep)
    return run


def train_config(cfg):
    return fc.TrainConfig(
        mode=cfg.mode, batch=cfg.batch, lr=cfg.lr, patience=cfg.patience,
        max_epochs=cfg.max_epochs, seed=cfg.seed, hidden=cfg.hidden,
        quantiles=fc.WIDE_QUANTILES if cfg.wide_interval else fc.DECILES,
    )


def interval_levels(cfg):
    return (0.05, 0.95) if cfg.wide_interval else (0.1, 0.9)


def fit_variant(frame, variant, cfg, split=None, progress=None):
    split = resolve_split(frame, cfg) if split is None else split
    run = prepare_variant(frame, variant, cfg, split)
    train_w, _ = make_windows(run.frame, split)
    run.model = fc.train(train_w, train_config(cfg), progress=progress)
    return run


def feature_frame_for(frame, model, compressor=None):
    """Rebuild the model's input frame from a full frame (used after loading checkpoints)."""
    if CG_COLUMN in model.feature_names:
        if compressor is None:
            raise ConfigError("model uses CG features but no autoencoder checkpoint was given")
        frame = add_compressed(frame, compressor)
    missing = [n for n in model.feature_names if n not in frame.columns]
    if missing:
        raise ConfigError(f"frame lacks model features {missing}")
    return frame.select(model.feature_names)


def forecast_test(model, frame, split):
    """Forecasts and observed days for every test window."""
    _, test_w = make_windows(frame, split)
    if not test_w:
        raise ConfigError("no test windows after the split date")
    X, Y, A = stack_windows(test_w)
    point, q = fc.predict_many(model, X)
    results = [
        fc.ForecastResult(a, point[i], None if q is None else q[i], tuple(model.quantiles))
        for i, a in enumerate(A)
    ]
    return results, Y


def evaluate(model, frame, split, cfg, name="model"):
    forecasts, truths = forecast_test(model, frame, split)
    sigma = model.residual_sd if model.mode == "point" else None
    return segment_report(forecasts, truths, sigma, interval_levels(cfg), name)


def ablate(frame, variants, cfg, baseline=None, progress=None):
    """Train and score each variant with the same seed and split.

    Returns ``(runs, comparison rows, failures)``; a failing variant is
    reported and the rest still run.
    """
    split = resolve_split(frame, cfg)
    runs, failures = [], {}
    for v in variants:
        try:
            run = fit_variant(frame, v, cfg, split, progress)
            run.report = evaluate(run.model, run.frame, split, cfg, v)
            runs.append(run)
        except NewsloadError as exc:
            log.error("variant %s failed: %s", v, exc)
            failures[v] = str(exc)
    baseline = baseline or (runs[0].name if runs else variants[0])
    rows = compare_models([r.report for r in runs], baseline) if runs else []
    return runs, rows, failures
