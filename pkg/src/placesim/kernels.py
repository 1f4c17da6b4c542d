"""Backend selection for the placement kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise the
pure-Python twin. Set ``PLACESIM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("PLACESIM_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

evaluate = _impl.evaluate
first_fit = _impl.first_fit
evict_overloaded = _impl.evict_overloaded
reinsert = _impl.reinsert


def compiled_available() -> bool:
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True
