"""Kernel selection: the compiled extension when it is importable, the numpy
fallback otherwise. Set DEGENFLOW_PURE=1 to force the fallback."""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("DEGENFLOW_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

face_coef = backend.face_coef
rhs = backend.rhs
advance = backend.advance
