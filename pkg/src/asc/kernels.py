"""Convolution kernel dispatch.

The compiled core is used when it was built; otherwise the numpy fallback.
Set ``ASC_KERNELS=python`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("ASC_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "compiled"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward


def backend(name: str):
    """Kernel module by name, for benchmarks and cross-checks."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            from . import _kernels
            return _kernels
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
