"""Deterministic and probabilistic scores, day-segment reports and model comparison."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from newsload.errors import AlignmentError, EmptyInput, UnknownBaseline
from newsload.timeseries import SEGMENT_LABELS, SLOTS_PER_DAY, segment_slots

INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.size == 0 or truth.size == 0:
        raise EmptyInput("metrics need at least one value")
    if pred.shape != truth.shape:
        raise AlignmentError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return pred, truth


def rmse(pred, truth):
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mae(pred, truth):
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def smape(pred, truth):
    """Symmetric MAPE in percent; a term with y = yhat = 0 counts as 0."""
    pred, truth = _pair(pred, truth)
    num = np.abs(truth - pred)
    den = (np.abs(truth) + np.abs(pred)) / 2.0
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(100.0 * np.mean(terms))


def pinball(preds, truth, quantiles):
    """Mean pinball loss for each quantile level.

    ``preds`` is (Q, ...) with one row per level; ``truth`` matches a row.
    """
    preds = np.asarray(preds, dtype=float)
    truth = np.asarray(truth, dtype=float)
    q = np.asarray(quantiles, dtype=float)
    if preds.shape[0] != len(q) or preds.shape[1:] != truth.shape:
        raise AlignmentError("quantile predictions do not match truth")
    u = truth[None] - preds
    qb = q.reshape((-1,) + (1,) * truth.ndim)
    loss = np.maximum(qb * u, (qb - 1.0) * u)
    return loss.reshape(len(q), -1).mean(axis=1)


@dataclass(frozen=True)
class PredictionInterval:
    lower: np.ndarray
    upper: np.ndarray
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ValueError("interval lower bound exceeds upper bound")


@dataclass(frozen=True)
class GaussianForecast:
    mean: np.ndarray
    sd: np.ndarray


def winkler_scores(lower, upper, truth, alpha):
    """Per-point Winkler score of observations against a 100(1-alpha)% interval."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    y = np.asarray(truth, dtype=float)
    width = upper - lower
    below = np.where(y < lower, (2.0 / alpha) * (lower - y), 0.0)
    above = np.where(y > upper, (2.0 / alpha) * (y - upper), 0.0)
    return width + below + above


def winkler(interval: PredictionInterval, truth):
    return float(np.mean(winkler_scores(interval.lower, interval.upper, truth, interval.alpha)))


def crps_gaussian_scores(mean, sd, truth):
    """Closed-form CRPS of N(mean, sd^2) against observations.

    ``sd = 0`` gives the absolute error (the step-function limit).
    """
    mean, sd, y = np.broadcast_arrays(
        np.asarray(mean, dtype=float), np.asarray(sd, dtype=float), np.asarray(truth, dtype=float)
    )
    if np.any(sd < 0):
        raise ValueError("sd must be non-negative")
    pos = sd > 0
    safe = np.where(pos, sd, 1.0)
    z = (y - mean) / safe
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    gauss = safe * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * pdf - INV_SQRT_PI)
    out = np.where(pos, gauss, np.abs(y - mean))
    return out if out.ndim else float(out)


def crps_gaussian(forecast: GaussianForecast, truth):
    return float(np.mean(crps_gaussian_scores(forecast.mean, forecast.sd, truth)))


def sigma_from_interval(lower, upper, lo_level, hi_level):
    """Gaussian sd consistent with the given quantile pair."""
    return (np.asarray(upper) - np.asarray(lower)) / (ndtri(hi_level) - ndtri(lo_level))


def improvement(baseline, value):
    return (baseline - value) / baseline * 100.0


# ------------------------------------------------------------------ reports


@dataclass
class MetricReport:
    model: str
    rmse: float
    mae: float
    smape_percent: float
    segments: dict
    pinball: dict = field(default_factory=dict)
    winkler: dict = field(default_factory=dict)
    crps: dict = field(default_factory=dict)
    interval: str = ""
    n_days: int = 0

    def check(self):
        """Assert the report invariants (finite, non-negative, rmse >= mae)."""
        vals = [self.rmse, self.mae, self.smape_percent]
        for seg in self.segments.values():
            vals += list(seg.values())
        vals += list(self.pinball.values()) + list(self.winkler.values()) + list(self.crps.values())
        assert all(math.isfinite(v) and v >= 0 for v in vals), "report has negative or non-finite values"
        assert self.rmse >= self.mae - 1e-9
        for seg in self.segments.values():
            assert seg["rmse"] >= seg["mae"] - 1e-9
        return self

    def to_dict(self):
        return asdict(self)


def _daily(fn, pred, truth, slots=None):
    if slots is not None:
        pred, truth = pred[:, slots], truth[:, slots]
    return float(np.mean([fn(p, t) for p, t in zip(pred, truth)]))


def segment_report(forecasts, truths, sigma=None, interval=(0.1, 0.9), model="model"):
    """Score a list of day-ahead forecasts against the observed days.

    Deterministic metrics are computed per day and averaged over days,
    overall and per segment. Probabilistic scores use the forecasts'
    quantile rows when present; point forecasts need ``sigma`` (scalar or
    48-vector), from which Gaussian quantiles are derived.
    """
    truths = np.asarray(truths, dtype=float)
    if len(forecasts) != len(truths) or len(forecasts) == 0:
        raise AlignmentError(f"{len(forecasts)} forecasts for {len(truths)} observed days")
    if truths.shape[1:] != (SLOTS_PER_DAY,):
        raise AlignmentError("each observed day needs 48 values")
    point = np.stack([f.point for f in forecasts])
    segs = {}
    for label in SEGMENT_LABELS:
        sl = segment_slots(label)
        segs[label] = {
            "rmse": _daily(rmse, point, truths, sl),
            "mae": _daily(mae, point, truths, sl),
            "smape": _daily(smape, point, truths, sl),
        }
    report = MetricReport(
        model, _daily(rmse, point, truths), _daily(mae, point, truths), _daily(smape, point, truths),
        segs, n_days=len(truths),
    )

    levels = tuple(forecasts[0].levels) if forecasts[0].quantiles is not None else ()
    if levels:
        qs = np.stack([f.quantiles for f in forecasts], axis=1)  # (Q, N, 48)
    elif sigma is not None:
        from newsload.forecaster import DECILES

        levels = DECILES
        sd = np.broadcast_to(np.asarray(sigma, dtype=float), point.shape)
        qs = np.stack([point + ndtri(q) * sd for q in levels])
    else:
        return report.check()

    for q, v in zip(levels, pinball(qs, truths, levels)):
        report.pinball[f"{q:g}"] = float(v)
    lo, hi = interval
    if lo not in levels or hi not in levels:
        raise AlignmentError(f"interval levels {interval} not among forecast quantiles {levels}")
    alpha = round(1.0 - (hi - lo), 12)
    lower, upper = qs[levels.index(lo)], qs[levels.index(hi)]
    report.interval = f"[q{lo:g}, q{hi:g}] alpha={alpha:g}"
    if forecasts[0].quantiles is not None:
        sd = sigma_from_interval(lower, upper, lo, hi)
    w = winkler_scores(lower, upper, truths, alpha)
    c = crps_gaussian_scores(point, sd, truths)
    report.winkler["all"] = float(w.mean())
    report.crps["all"] = float(c.mean())
    for label in SEGMENT_LABELS:
        sl = segment_slots(label)
        report.winkler[label] = float(w[:, sl].mean())
        report.crps[label] = float(c[:, sl].mean())
    return report.check()


def compare_models(reports, baseline):
    """Comparison rows: each model's scores and % improvement over ``baseline``."""
    by_name = {r.model: r for r in reports}
    if baseline not in by_name:
        raise UnknownBaseline(f"baseline {baseline!r} not among {sorted(by_name)}")
    base = by_name[baseline]
    rows = []
    for r in reports:
        row = {"model": r.model, "rmse": r.rmse, "mae": r.mae, "smape": r.smape_percent}
        for k, b in (("rmse", base.rmse), ("mae", base.mae), ("smape", base.smape_percent)):
            row[f"{k}_improvement_pct"] = improvement(b, row[k]) if b else 0.0
        if r.winkler and base.winkler:
            row["winkler"] = r.winkler["all"]
            row["winkler_improvement_pct"] = improvement(base.winkler["all"], r.winkler["all"])
        if r.crps and base.crps:
            row["crps"] = r.crps["all"]
            row["crps_improvement_pct"] = improvement(base.crps["all"], r.crps["all"])
        rows.append(row)
    return rows


def _g(x):
    return f"{x:.6g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _g(v) for v in row])


def _rounded(obj):
    if isinstance(obj, float):
        return float(_g(obj))
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def write_report(report: MetricReport, directory):
    """Write metrics.json plus the per-segment and per-quantile CSV files."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(_rounded(report.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_rows(
        os.path.join(directory, "segments.csv"),
        ["segment", "rmse", "mae", "smape"],
        [[s, v["rmse"], v["mae"], v["smape"]] for s, v in report.segments.items()],
    )
    _write_rows(
        os.path.join(directory, "pinball_by_quantile.csv"),
        ["quantile", "pinball"],
        [[q, v] for q, v in report.pinball.items()],
    )
    _write_rows(
        os.path.join(directory, "winkler_by_segment.csv"),
        ["segment", "winkler"],
        [[s, report.winkler[s]] for s in SEGMENT_LABELS if s in report.winkler],
    )
    _write_rows(
        os.path.join(directory, "crps_by_segment.csv"),
        ["segment", "crps"],
        [[s, report.crps[s]] for s in SEGMENT_LABELS if s in report.crps],
    )


def write_comparison(rows, path):
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    _write_rows(path, keys, [[r.get(k, float("nan")) if k != "model" else r[k] for k in keys] for r in rows])
