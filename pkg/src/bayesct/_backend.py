"""Kernel selection.

The compiled kernel is used when it imports cleanly; setting the environment
variable ``BAYESCT_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

from __future__ import annotations

import os

from . import _pykernel

PyKernel = _pykernel.Kernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

CKernel = _ckernel.Kernel if _ckernel is not None else None

if CKernel is not None and not os.environ.get("BAYESCT_PURE_PYTHON"):
    Kernel = CKernel
    BACKEND = "cython"
else:
    Kernel = PyKernel
    BACKEND = "python"


def kernel_class(backend: str | None = None):
    """Kernel class for `backend` ("cython", "python" or None for the default)."""
    if backend is None:
        return Kernel
    if backend == "python":
        return PyKernel
    if backend == "cython":
        if CKernel is None:
            raise ImportError("compiled kernel is not available; rebuild the package")
        return CKernel
    raise ValueError(f"unknown backend {backend!r}")
