"""Kernel backend selection.

The compiled extension (`drifttrack._kernels_cy`) is used when it imported
cleanly; otherwise the pure-numpy module takes over.  Set
DRIFTTRACK_BACKEND=python or =cython to force a choice (forcing cython
raises if the extension is unavailable).
"""
from __future__ import annotations

import os

from . import _kernels_py

_FORCE = os.environ.get("DRIFTTRACK_BACKEND", "auto").lower()

if _FORCE in ("python", "py"):
    kernels = _kernels_py
elif _FORCE in ("cython", "cy", "compiled"):
    from . import _kernels_cy as kernels  # noqa: F401
else:
    try:
        from . import _kernels_cy as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name() -> str:
    return kernels.NAME


def available_backends():
    names = ["python"]
    try:
        from . import _kernels_cy  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_kernels(name: str):
    """Fetch a backend module by name (used by tests and the benchmark)."""
    if name in ("python", "py"):
        return _kernels_py
    if name in ("cython", "cy", "compiled"):
        from . import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")
