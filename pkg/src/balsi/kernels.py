"""Backend selection for the hot kernels.

The compiled extension ``balsi._kernels`` is used when it imports; otherwise
the pure-Python module ``balsi._kernels_py`` takes over.  Setting the
environment variable ``BALSI_PURE_PYTHON=1`` forces the fallback.
"""

import importlib
import os

_MODULES = {"cython": "balsi._kernels", "python": "balsi._kernels_py"}


def load_backend(name):
    """Import and return the kernel module for ``name`` ("cython" or "python")."""
    return importlib.import_module(_MODULES[name])


def _select():
    if os.environ.get("BALSI_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, kern = _select()
