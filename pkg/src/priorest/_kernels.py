"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``PRIOREST_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the cross-check tests).
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("PRIOREST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ext
    except ImportError:  # extension not built
        _ext = None
    else:
        BACKEND = "cython"
else:
    _ext = None

_impl = _ext if _ext is not None else _pykernels

jacobi_eigh = _impl.jacobi_eigh
schur_complement = _impl.schur_complement
