"""Day-ahead electricity demand forecasting with news-derived features.

Modules follow the pipeline: :mod:`ingest` and :mod:`textfeat` build a
:class:`~newsload.timeseries.SeriesFrame`, :mod:`granger` and
:mod:`autoencoder` reduce the text features, :mod:`forecaster` trains the
LSTM, and :mod:`metrics` scores it.
"""
__version__ = "0.1.0"

from newsload.timeseries import SeriesFrame, make_windows, segment_of, encode_calendar  # noqa: E402
from newsload.kernels import BACKEND  # noqa: E402
