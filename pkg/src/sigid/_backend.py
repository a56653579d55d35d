"""Pick the compiled kernels when available, the numpy fallback otherwise.

Set ``SIGID_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("SIGID_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

zhang_suen = _impl.zhang_suen
smo_solve = _impl.smo_solve
