"""Hot-loop kernels: compiled extension when built, numpy fallback otherwise.

``VAREXP_BACKEND`` (``auto``, ``cython``, ``python``) forces the choice;
``VAREXP_THREADS`` caps the worker threads used for element loops.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BLOCK = 4096

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _select(name: str):
    if name == "auto":
        return _ckernels if _ckernels is not None else _pykernels
    if name not in _BACKENDS:
        raise ImportError(f"kernel backend {name!r} unavailable; have {available_backends()}")
    return _BACKENDS[name]


_impl = _select(os.environ.get("VAREXP_BACKEND", "auto").lower())


def backend_name() -> str:
    return _impl.NAME


def set_backend(name: str) -> str:
    """Switch backend at runtime; returns the previous name."""
    global _impl
    prev = _impl.NAME
    _impl = _select(name)
    return prev


def threads() -> int:
    try:
        return max(1, int(os.environ.get("VAREXP_THREADS", "1")))
    except ValueError:
        return 1


def _blocked(fn, n_elem: int, n: int, args_for):
    """Run ``fn`` over fixed element blocks and sum buffers in block order.

    Blocks do not depend on the thread count, so results are identical
    for any ``VAREXP_THREADS``.
    """
    starts = list(range(0, n_elem, BLOCK))
    if len(starts) <= 1:
        return fn(*args_for(slice(0, n_elem)))
    nt = min(threads(), len(starts))
    jobs = [slice(s, min(s + BLOCK, n_elem)) for s in starts]
    if nt == 1:
        parts = [fn(*args_for(sl)) for sl in jobs]
    else:
        with ThreadPoolExecutor(nt) as ex:
            parts = list(ex.map(lambda sl: fn(*args_for(sl)), jobs))
    out = np.zeros(n)
    for part in parts:
        out += part
    return out


def grad_flux(tri, grads, u, expo, wts):
    """sum_e sum_q wts |grad u|^(expo-2) grad u . grad phi_i, per node i."""
    n = u.shape[0]
    u = np.ascontiguousarray(u, dtype=float)
    return _blocked(lambda *a: _impl.grad_flux(*a, n), tri.shape[0], n,
                    lambda sl: (tri[sl], grads[sl], u, expo[sl], wts[sl]))


def value_flux(tri, bary, u, expo, wts, log_mode: bool):
    """sum_e sum_q wts |u|^(expo-2) u [ln|u|] phi_i, per node i (0 at u=0)."""
    n = u.shape[0]
    u = np.ascontiguousarray(u, dtype=float)
    return _blocked(lambda *a: _impl.value_flux(*a, bool(log_mode), n), tri.shape[0], n,
                    lambda sl: (tri[sl], bary, u, expo[sl], wts[sl]))


def power_sum(vals, expo, wts, scale: float = 1.0) -> float:
    """sum wts * |scale*vals|^expo over (T, Q) arrays."""
    if not (np.shape(vals) == np.shape(expo) == np.shape(wts)):
        raise ValueError(f"shape mismatch: {np.shape(vals)}, {np.shape(expo)}, {np.shape(wts)}")
    return float(_impl.power_sum(vals, expo, wts, float(scale)))


def pcg(A, rhs, x0, tol: float, maxiter: int):
    indptr = np.ascontiguousarray(A.indptr, dtype=np.int32)
    indices = np.ascontiguousarray(A.indices, dtype=np.int32)
    data = np.ascontiguousarray(A.data, dtype=float)
    return _impl.pcg(indptr, indices, data, A.shape[0],
                     np.ascontiguousarray(rhs, dtype=float),
                     np.ascontiguousarray(x0, dtype=float), float(tol), int(maxiter))
