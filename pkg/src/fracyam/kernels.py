"""Hot loops, compiled when the extension module is available.

Set ``FYAM_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
thomas_batched = _kernels_py.thomas_batched
element_apply = _kernels_py.element_apply

if os.environ.get("FYAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        thomas_batched = _compiled.thomas_batched
        element_apply = _compiled.element_apply

__all__ = ["BACKEND", "thomas_batched", "element_apply"]
