"""Backend selection for the inner loops.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is used.  Setting ``FREEDIAG_PURE_PYTHON=1``
forces the fallback.  ``BACKEND`` names the active implementation.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("FREEDIAG_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def available_backends():
    """Mapping of backend name to module, for tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def converged(d, x, tol):
    """Shared stopping rule: ``|Re d| <= tol (1 + |x|)`` and ``|Im d| <= tol |Im x|``."""
    return bool(np.all(np.abs(d.real) <= tol * (1.0 + np.abs(x)))
                and np.all(np.abs(d.imag) <= tol * np.abs(x.imag)))


def dyson_damped(S, b0, g0, theta, tol, max_iter):
    return _impl.dyson_damped(np.ascontiguousarray(S, dtype=float),
                              np.ascontiguousarray(b0, dtype=complex),
                              np.ascontiguousarray(g0, dtype=complex),
                              float(theta), float(tol), int(max_iter))


def atomic_cauchy(w, locations, masses):
    return _impl.atomic_cauchy(complex(w), locations, masses)


def atomic_subordination(b, loc_x, mass_x, loc_y, mass_y, w0, theta, tol, max_iter,
                         stall_limit=50):
    return _impl.atomic_subordination(complex(b), np.ascontiguousarray(loc_x, dtype=float),
                                      np.ascontiguousarray(mass_x, dtype=float),
                                      np.ascontiguousarray(loc_y, dtype=float),
                                      np.ascontiguousarray(mass_y, dtype=float), complex(w0),
                                      float(theta), float(tol), int(max_iter), int(stall_limit))


def block_average_rows(weights, block_sizes):
    weights = np.ascontiguousarray(weights, dtype=float)
    sizes = np.ascontiguousarray(block_sizes, dtype=np.int64)
    if weights.ndim != 2 or np.any(sizes < 1) or sizes.sum() != weights.shape[0]:
        raise ValueError(f"block sizes {sizes.tolist()} do not partition "
                         f"{weights.shape[0] if weights.ndim else 0} rows")
    return _impl.block_average_rows(weights, sizes)
