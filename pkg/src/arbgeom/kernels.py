"""Backend selection for the hot loops.

The compiled Cython module is used when it has been built; otherwise the
NumPy fallback is imported.  Set ``ARBGEOM_PURE_PYTHON=1`` to force the
fallback (useful for benchmarking and for cross-checking the two).
"""

import os

if os.environ.get("ARBGEOM_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import assign_classes, bellman_ford, boyling_characteristic

    BACKEND = "python"
else:
    try:
        from ._ckernels import assign_classes, bellman_ford, boyling_characteristic

        BACKEND = "cython"
    except ImportError:
        from ._pykernels import assign_classes, bellman_ford, boyling_characteristic

        BACKEND = "python"

__all__ = ["BACKEND", "assign_classes", "bellman_ford", "boyling_characteristic"]
