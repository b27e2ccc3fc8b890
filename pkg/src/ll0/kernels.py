"""Kernel dispatch: the compiled extension when importable, else pure Python.

Set ``LL0_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("LL0_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

forward = _impl.forward
forward_batch = _impl.forward_batch
backward = _impl.backward
