"""Backend selection for the hot assembly kernels.

The compiled extension is used when it was built and imports cleanly;
otherwise, or when ``PMORKIT_PURE_PYTHON=1`` is set, the NumPy reference
implementation is used. ``BACKEND`` names the active choice.
"""

import os

from . import _kernels_py

if os.environ.get("PMORKIT_PURE_PYTHON", "") not in ("", "0"):
    _ext = None
else:
    try:
        from . import _kernels as _ext
    except ImportError:  # extension not built
        _ext = None

if _ext is not None:
    segment_forces = _ext.segment_forces
    BACKEND = "cython"
else:
    segment_forces = _kernels_py.segment_forces
    BACKEND = "python"

__all__ = ["segment_forces", "BACKEND"]
