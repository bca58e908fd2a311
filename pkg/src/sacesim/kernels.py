"""Backend selection for the batched step kernel.

The compiled extension is used when it imports; set
``SACESIM_BACKEND=python`` to force the NumPy fallback.
"""
import os

from . import _kernels_py as python_backend

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

_requested = os.environ.get("SACESIM_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"SACESIM_BACKEND must be auto, python or compiled, not {_requested!r}")
if _requested == "compiled" and compiled_backend is None:
    raise ImportError("SACESIM_BACKEND=compiled but the extension is not built")

if _requested == "python" or compiled_backend is None:
    active = python_backend
else:
    active = compiled_backend

BACKEND = active.BACKEND


def get_backend(name=None):
    """Module implementing ``step_batch`` for ``name`` (default: active)."""
    if name is None:
        return active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernel is not built")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
