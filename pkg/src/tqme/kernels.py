"""Backend selection for the inner-loop kernels.

The compiled extension is used when it imports; set ``TQME_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TQME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

# above this dimension BLAS-backed numpy products beat the naive compiled loops
COMPILED_MAX_DIM = 16

log_mean_matrix = _impl.log_mean_matrix
eigensystem_coupling = _impl.eigensystem_coupling
mgs_orthonormalize = _impl.mgs_orthonormalize


def thermo_dissipator(Qt, QHt, w, p, c_S, c_H):
    if len(p) > COMPILED_MAX_DIM:
        return _kernels_py.thermo_dissipator(Qt, QHt, w, p, c_S, c_H)
    return _impl.thermo_dissipator(Qt, QHt, w, p, c_S, c_H)


__all__ = ["BACKEND", "log_mean_matrix", "eigensystem_coupling", "mgs_orthonormalize", "thermo_dissipator"]
