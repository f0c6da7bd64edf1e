"""Select the path-kernel implementation once, at import time.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``WPEXTREMA_BACKEND=python`` is set, the numpy fallback
is used.  ``BACKEND`` names the active choice ("cython" or "python").
"""

from __future__ import annotations

import os

from . import _fallback


def _load():
    if os.environ.get("WPEXTREMA_BACKEND", "").strip().lower() == "python":
        return _fallback, "python"
    try:
        from . import _kernels
    except ImportError:
        return _fallback, "python"
    return _kernels, "cython"


kernels, BACKEND = _load()
