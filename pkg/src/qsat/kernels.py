"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``QSAT_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy / pure-Python reference kernels are used.
"""
from __future__ import annotations

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)


def _load():
    if os.environ.get("QSAT_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable; using the Python fallback")
        return _pykernels
    return _ckernels


_impl = _load()

BACKEND = _impl.BACKEND
unsat_counts = _impl.unsat_counts
apply_mixer = _impl.apply_mixer
sum_x = _impl.sum_x
zeta_subset = _impl.zeta_subset
zeta_superset = _impl.zeta_superset
walk = _impl.walk

python = _pykernels
