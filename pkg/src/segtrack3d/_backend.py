"""Kernel backend selection.

The compiled extension is preferred when importable; the pure numpy
fallback is selected otherwise, or when SEGTRACK3D_PURE=1 is set. Both
expose the same two functions with bit-identical output.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

_FORCE_PURE = os.environ.get("SEGTRACK3D_PURE", "").strip().lower() not in ("", "0", "false")

if _FORCE_PURE:
    _impl: ModuleType = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND_NAME: str = _impl.BACKEND_NAME
watershed_flood = _impl.watershed_flood
slic_assign = _impl.slic_assign


def available_backends() -> list[str]:
    names = ["pure"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_backend(name: str) -> ModuleType:
    """Explicit backend module lookup, for parity tests and benchmarks."""
    if name == "pure":
        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
