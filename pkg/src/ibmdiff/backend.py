"""Select the compiled or pure-Python kernel implementation at import.

Set ``IBMDIFF_PURE_PYTHON=1`` to force the NumPy fallback.
"""

import os

from . import _pykernels

NAME = "python"

if not os.environ.get("IBMDIFF_PURE_PYTHON"):
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pykernels
    else:
        NAME = "cython"
else:
    _impl = _pykernels

ftcs_step = _impl.ftcs_step
fill_ghosts = _impl.fill_ghosts


def available():
    """Names of importable backends, compiled first."""
    names = []
    try:
        from . import _speedups  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _speedups
        return _speedups
    raise ValueError(f"unknown backend {name!r}")
