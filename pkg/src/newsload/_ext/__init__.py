"""Compiled kernels for the LSTM recurrence.

The Cython module ``_recurrence`` is optional; :mod:`newsload.kernels`
falls back to the numpy implementation in :mod:`newsload._ext.fallback`
when it is missing or when ``NEWSLOAD_PURE=1`` is set.
"""
