"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise,
or when ``ANNEALCAST_PURE=1`` is set, the pure-Python versions are used.
``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("ANNEALCAST_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

ema = _impl.ema
wilder = _impl.wilder
cd_sweep = _impl.cd_sweep

__all__ = ["BACKEND", "ema", "wilder", "cd_sweep"]
