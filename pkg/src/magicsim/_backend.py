"""Selects the compiled kernel when importable, else the pure-Python one.

Set ``MAGICSIM_PURE=1`` to force the fallback.
"""
import os

from . import _pykernel

pure = _pykernel

if os.environ.get("MAGICSIM_PURE") == "1":
    kernel = _pykernel
    NAME = "python"
else:
    try:
        from . import _kernel as kernel
        NAME = "cython"
    except ImportError:
        kernel = _pykernel
        NAME = "python"

try:
    from . import _kernel as compiled
except ImportError:
    compiled = None
