"""Backend selection for the LSTM recurrence kernels.

The compiled Cython module is used when importable; otherwise (or when the
environment variable ``NEWSLOAD_PURE`` is set to ``1``) the numpy fallback
is used. Both expose ``recurrence_forward`` and ``recurrence_backward``.
"""
import os

from newsload._ext import fallback

_compiled = None
if os.environ.get("NEWSLOAD_PURE", "0") != "1":
    try:
        from newsload._ext import _recurrence as _compiled
    except ImportError:  # pragma: no cover
        _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"
_impl = _compiled if _compiled is not None else fallback


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'numpy' or None for default)."""
    if name is None:
        return _impl
    if name == "numpy":
        return fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def recurrence_forward(zx, U):
    return _impl.recurrence_forward(zx, U)


def recurrence_backward(U, cs, gates, tcs, dh_last):
    return _impl.recurrence_backward(U, cs, gates, tcs, dh_last)
