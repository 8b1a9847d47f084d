"""Kernel backend selection.

The compiled extension is used when it was built; set ``HAM_LEVY_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("HAM_LEVY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

cone_recursion = _impl.cone_recursion
cone_sum = _impl.cone_sum

__all__ = ["BACKEND", "cone_recursion", "cone_sum"]
