"""Kernel backend selection.

Prefers the compiled extension, falls back to numpy when it is missing;
``CROSSCAP_PURE=1`` forces the fallback (useful for the benchmark and for
debugging).  Both backends share one contract, checked by the parity tests.
"""

import os

from . import _ref

if os.environ.get("CROSSCAP_PURE"):
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

__all__ = ["lstm_forward", "lstm_backward", "BACKEND"]
