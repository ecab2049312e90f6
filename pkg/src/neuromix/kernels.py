"""Kernel selection: compiled extension when available, pure python otherwise.

Set ``NEUROMIX_PURE=1`` to force the fallback (useful for benchmarking and
for debugging kernel-level discrepancies).  ``IMPLEMENTATION`` reports which
one is active; traces are reproducible bit for bit only within one
implementation.
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("NEUROMIX_PURE") == "1":
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _core_py

IMPLEMENTATION: str = _impl.IMPLEMENTATION

net_run = _impl.net_run
net_rhs = _impl.net_rhs
model_run = _impl.model_run
model_rhs = _impl.model_rhs
empty_segments = _impl.empty_segments

MODEL_HH = _core_py.MODEL_HH
MODEL_R15 = _core_py.MODEL_R15

__all__ = [
    "IMPLEMENTATION", "net_run", "net_rhs", "model_run", "model_rhs",
    "empty_segments", "MODEL_HH", "MODEL_R15",
]
