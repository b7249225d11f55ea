"""Kernel selection.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``CLONERAD_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python implementation is loaded instead.
"""

import os

from . import _purepy

_force_pure = os.environ.get("CLONERAD_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _purepy
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _purepy

BACKEND = "compiled" if _impl is not _purepy else "python"

rk4_gain_loss = _impl.rk4_gain_loss
rk4_gain_loss_final = _impl.rk4_gain_loss_final
