"""Selects the kernel implementation at import time.

The compiled extension (octsearch._native) and the pure-Python module
(octsearch._pure) implement the same kernels with lockstep arithmetic and a
shared RNG, so seeded runs produce identical results on either. The
extension wins when it is importable; OCTSEARCH_PURE=1 forces the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("OCTSEARCH_PURE") == "1":
    from . import _pure as kernels
else:
    try:
        from . import _native as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as kernels  # type: ignore[no-redef]

IMPL_NAME: str = kernels.IMPL
