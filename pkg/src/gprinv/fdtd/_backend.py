"""Select the time-stepping kernel at import.

GPRINV_BACKEND=auto (default) prefers the compiled extension and falls back
to the numpy kernel; =compiled requires the extension; =python forces the
fallback (useful for benchmarking and debugging).
"""

import os
import warnings


def _load():
    choice = os.environ.get("GPRINV_BACKEND", "auto")
    if choice not in ("auto", "compiled", "python"):
        raise RuntimeError(
            f"GPRINV_BACKEND={choice!r} not recognized (auto|compiled|python)"
        )
    if choice in ("auto", "compiled"):
        try:
            from . import _kernel  # noqa: F401  (compiled extension)

            return _kernel.run_leapfrog, "compiled"
        except ImportError:
            if choice == "compiled":
                raise
            warnings.warn(
                "compiled FDTD kernel unavailable; using the pure-Python "
                "fallback (build the extension for a large speedup)",
                stacklevel=2,
            )
    from . import _kernel_py

    return _kernel_py.run_leapfrog, "python"


run_leapfrog, BACKEND_NAME = _load()
