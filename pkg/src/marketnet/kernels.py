"""Select the kernel backend at import.

The compiled extension ``marketnet._native`` is used when importable.  Set
``MARKETNET_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
from __future__ import annotations

import importlib
import logging
import os
from types import ModuleType

logger = logging.getLogger(__name__)

KERNEL_NAMES = (
    "lasso_cd_gram",
    "jacobi_eigh",
    "garch_loglik",
    "dcc_correlations",
    "dcc_loglik",
)


def load_backend(name: str | None = None) -> ModuleType:
    """Return a kernel module by name ("cython" or "python"); None = best available."""
    if name == "python":
        return importlib.import_module("marketnet._pure")
    if name == "cython":
        return importlib.import_module("marketnet._native")
    if name is not None:
        raise ValueError(f"unknown kernel backend {name!r}")
    try:
        return importlib.import_module("marketnet._native")
    except ImportError:
        logger.debug("compiled kernels unavailable; using pure-Python fallback")
        return importlib.import_module("marketnet._pure")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


_mod = load_backend("python" if os.environ.get("MARKETNET_PURE_PYTHON") else None)

BACKEND: str = _mod.BACKEND
lasso_cd_gram = _mod.lasso_cd_gram
jacobi_eigh = _mod.jacobi_eigh
garch_loglik = _mod.garch_loglik
dcc_correlations = _mod.dcc_correlations
dcc_loglik = _mod.dcc_loglik
