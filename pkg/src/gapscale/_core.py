"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; otherwise the
numpy fallback.  ``GAPSCALE_BACKEND=python`` forces the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("GAPSCALE_BACKEND", "").lower() not in ("python", "fallback", "numpy"):
    try:
        from . import _kernels as kernels  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        kernels = _fallback


def use_backend(name):
    """Switch backend at runtime ("cython" or "python"); returns the previous name."""
    global kernels, BACKEND
    previous = BACKEND
    if name == "python":
        kernels, BACKEND = _fallback, "python"
    elif name == "cython":
        from . import _kernels

        kernels, BACKEND = _kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous
