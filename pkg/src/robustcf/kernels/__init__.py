"""Hot-loop kernels with a compiled core and a NumPy fallback.

The compiled extension (``robustcf.kernels._native``, built by setup.py) is
preferred at import time; when it is missing, or when the environment
variable ``ROBUSTCF_PURE_PYTHON=1`` is set, the NumPy implementations in
``py_backend`` are used instead. Both backends implement the same
contracts; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

from . import py_backend

_FORCED_PYTHON = os.environ.get("ROBUSTCF_PURE_PYTHON", "") == "1"

if not _FORCED_PYTHON:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = py_backend
        BACKEND = "python"
else:
    _impl = py_backend
    BACKEND = "python"

pairwise_corated_stats = _impl.pairwise_corated_stats
profile_sweep = _impl.profile_sweep
sgd_epoch = _impl.sgd_epoch


def active_backend() -> str:
    """'native' when the compiled extension is in use, else 'python'."""
    return BACKEND
