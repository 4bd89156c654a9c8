"""Selects the compiled kernels when they import, the pure-Python ones otherwise.

Set ``PROJSA_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_KERNELS = {"python": _pykernels}
if _core is not None:
    _KERNELS["compiled"] = _core

if os.environ.get("PROJSA_BACKEND", "").lower() == "python" or _core is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def available() -> list:
    return sorted(_KERNELS)


def kernels(name: str | None = None):
    name = name or BACKEND
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available (have {available()})") from None


def _c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def sa_loop(mode, x1, drift_kind, target, gains, omega, pen_kind, lam, shape,
            lower, upper, gammas, e, r, backend=None):
    """Run the recursion; returns ``(xs, hs, Ps, failed_index)``."""
    n = len(gammas)
    d = len(x1)
    xs = np.zeros((n, d))
    hs = np.zeros((n, d))
    Ps = np.zeros((n, d))
    failed = kernels(backend).sa_loop(
        int(mode), _c(x1), int(drift_kind), _c(target), _c(gains), float(omega),
        int(pen_kind), float(lam), float(shape), _c(lower), _c(upper), _c(gammas),
        _c(e), _c(r), xs, hs, Ps,
    )
    return xs, hs, Ps, int(failed)


def window_sup(F, ends, backend=None) -> np.ndarray:
    F = _c(F)
    if F.ndim == 1:
        F = F[:, None]
    ends = np.ascontiguousarray(ends, dtype=np.int64)
    if len(ends) != len(F):
        raise ValueError("ends must have one entry per row of F")
    if len(ends) and (np.any(ends < np.arange(len(ends))) or np.any(np.diff(ends) < 0) or ends[-1] >= len(F)):
        raise ValueError("ends must be nondecreasing, >= the row index and < len(F)")
    return kernels(backend).window_sup(F, ends)


def lipschitz_max(Z, tau, floor, ceil, backend=None) -> np.ndarray:
    Z = _c(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    return kernels(backend).lipschitz_max(Z, _c(tau), float(floor), float(ceil))
