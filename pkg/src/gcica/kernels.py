"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy twins.
Set ``GCICA_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

if os.environ.get("GCICA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using numpy fallback")
        _impl = _kernels_py
        BACKEND = "python"

threshold_components = _impl.threshold_components
knn_match_sums = _impl.knn_match_sums
prox_columns = _impl.prox_columns

__all__ = ["BACKEND", "threshold_components", "knn_match_sums", "prox_columns"]
