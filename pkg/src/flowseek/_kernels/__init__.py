"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy implementations take over with identical semantics.  Set
``FLOWSEEK_PURE_PYTHON=1`` to force the numpy backend (used by the parity
tests and the benchmark).
"""

import os

from . import _numpy_backend

if os.environ.get("FLOWSEEK_PURE_PYTHON"):
    _impl = _numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _numpy_backend
        BACKEND = "numpy"

correlate_all_pairs = _impl.correlate_all_pairs
avg_pool = _impl.avg_pool
lookup_level = _impl.lookup_level


def backend_name():
    """Name of the active kernel backend ('native' or 'numpy')."""
    return BACKEND
