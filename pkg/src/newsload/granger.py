"""Bivariate Granger-causality screening of daily text features."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from newsload.errors import NewsloadError, SeriesTooShort, SingularDesign

DEFAULT_MAX_LAG = 7
DEFAULT_ALPHA = 0.05


@dataclass
class GrangerResult:
    feature_name: str
    max_lag: int
    f_statistic: float
    p_value: float
    selected: bool = False
    error: str | None = None


def lag_matrix(series, max_lag):
    """Columns ``series[t-1], ..., series[t-max_lag]`` for t = max_lag .. n-1."""
    n = len(series)
    return np.column_stack([series[max_lag - k : n - k] for k in range(1, max_lag + 1)])


def ols_rss(X, y):
    """Residual sum of squares of the least-squares fit of y on X.

    Raises :class:`SingularDesign` when X is rank deficient.
    """
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid), beta


def granger_test(x, y, max_lag=DEFAULT_MAX_LAG, name="x") -> GrangerResult:
    """F-test of whether lags of ``x`` improve an autoregression of ``y``.

    Both regressions include an intercept and use the same ``n - max_lag``
    effective observations. The statistic is
    ``((RSS_r - RSS_u) / L) / (RSS_u / (n_eff - 2L - 1))``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    L = int(max_lag)
    if len(x) != len(y):
        raise ValueError("series must be aligned")
    n = len(y)
    if L < 1 or n <= 3 * L + 2:
        raise SeriesTooShort(f"{n} observations is too short for max_lag={L}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise SingularDesign(f"{name}: series has zero variance")
    target = y[L:]
    ones = np.ones((n - L, 1))
    ylags = lag_matrix(y, L)
    xlags = lag_matrix(x, L)
    rss_r, _ = ols_rss(np.hstack([ones, ylags]), target)
    rss_u, _ = ols_rss(np.hstack([ones, ylags, xlags]), target)
    df2 = (n - L) - 2 * L - 1
    if rss_u <= 0:
        f = np.inf if rss_r > 0 else 0.0
    else:
        f = max((rss_r - rss_u) / L / (rss_u / df2), 0.0)
    p = float(stats.f.sf(f, L, df2)) if np.isfinite(f) else 0.0
    return GrangerResult(name, L, float(f), p)


def select_features(tables, demand_daily, max_lag=DEFAULT_MAX_LAG, alpha=DEFAULT_ALPHA, bonferroni=False):
    """Test every column of every table against daily demand.

    ``tables`` is a mapping or sequence of ``(name, daily series)`` pairs or
    :class:`~newsload.textfeat.TextFeatureTable` objects. Failed tests are
    reported with ``selected=False`` and their error message. Results are
    sorted by feature name.
    """
    columns = []
    items = tables.items() if isinstance(tables, dict) else tables
    for item in items:
        if hasattr(item, "dim_names"):
            for j, dim in enumerate(item.dim_names):
                columns.append((f"{item.group}__{dim}", item.values[:, j]))
        else:
            columns.append(tuple(item))
    if not columns:
        raise ValueError("no feature columns to test")
    threshold = alpha / len(columns) if bonferroni else alpha
    out = []
    for name, series in sorted(columns, key=lambda c: c[0]):
        try:
            r = granger_test(series, demand_daily, max_lag, name=name)
            r.selected = r.p_value < threshold
        except NewsloadError as exc:
            r = GrangerResult(name, int(max_lag), float("nan"), float("nan"), False, str(exc))
        out.append(r)
    return out


def write_report(results, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "f_stat", "p_value", "selected"])
        for r in results:
            w.writerow([r.feature_name, f"{r.f_statistic:.6g}", f"{r.p_value:.6g}", int(r.selected)])
