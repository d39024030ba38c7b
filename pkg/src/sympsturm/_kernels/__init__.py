"""Backend selection for the propagation kernels.

The compiled extension is preferred when present; ``SYMPSTURM_NO_EXT=1``
forces the pure-Python fallback (used by the equivalence tests and the
benchmark).
"""

import os

from . import fallback

if os.environ.get("SYMPSTURM_NO_EXT", "") == "1":
    _backend = fallback
else:
    try:
        from . import _fast as _backend
    except ImportError:
        _backend = fallback

IMPLEMENTATION = _backend.IMPLEMENTATION
expm = _backend.expm
propagate = _backend.propagate

__all__ = ["IMPLEMENTATION", "expm", "propagate", "fallback"]
