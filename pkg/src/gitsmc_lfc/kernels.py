"""Backend selection for the closed-loop integrator.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation in ``_fallback``.  Set ``GITSMC_LFC_BACKEND=python`` to
force the fallback.
"""
import os

from . import _fallback
from ._fallback import KIND_GITSMC, KIND_NONE, KIND_PI

__all__ = ["simulate", "BACKEND", "KIND_NONE", "KIND_GITSMC", "KIND_PI", "get_simulate"]

_compiled = None
if os.environ.get("GITSMC_LFC_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    simulate = _compiled.simulate
    BACKEND = "cython"
else:
    simulate = _fallback.simulate
    BACKEND = "python"


def get_simulate(backend: str | None = None):
    """Return the integrator for ``"cython"``, ``"python"`` or the default."""
    if backend is None:
        return simulate
    if backend == "python":
        return _fallback.simulate
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.simulate
    raise ValueError(f"unknown backend {backend!r}")
