"""Hot numeric kernels: cyclic-Jacobi sweeps for symmetric eigendecomposition.

Two interchangeable implementations of the same rotation schedule:

* a numba ``@njit`` scalar-loop kernel (default), and
* a pure-numpy kernel that vectorizes the row/column updates.

Both apply identical floating-point operations per element in identical
order, so their outputs are bit-identical; which one runs is chosen once
at import time.  Set ``GCLAB_DISABLE_NUMBA=1`` to force the numpy path
(it is also used automatically when numba is not importable).

``benchmarks/bench_eigh.py`` times the two paths against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_FLAG = "GCLAB_DISABLE_NUMBA"

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    _HAVE_NUMBA = False

_NUMBA_DISABLED = os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes")
_USE_NUMBA = _HAVE_NUMBA and not _NUMBA_DISABLED


def backend() -> str:
    """Name of the active kernel path: ``"numba"`` or ``"numpy"``."""
    return "numba" if _USE_NUMBA else "numpy"


def _rotation_coeffs(app: float, aqq: float, apq: float) -> tuple[float, float, float]:
    """Stable Jacobi rotation (c, s, t) annihilating the (p, q) entry.

    Uses the tangent formulation t = sign(theta)/(|theta| + sqrt(theta^2+1))
    with an overflow guard for huge theta.  Shared by both kernel paths so
    the arithmetic stays identical.
    """
    theta = 0.5 * (aqq - app) / apq
    if abs(theta) > 1e154:
        t = 0.5 / theta
    elif theta >= 0.0:
        t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
    else:
        t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c
    return c, s, t


def _jacobi_sweeps_numpy(a: np.ndarray, v: np.ndarray, tol_abs: float, max_sweeps: int) -> tuple[float, int]:
    """Run cyclic Jacobi sweeps in place on (a, v); vectorized row updates.

    Returns (final max off-diagonal magnitude, sweeps used).
    """
    n = a.shape[0]
    off = _max_offdiag_numpy(a)
    sweeps = 0
    while off > tol_abs and sweeps < max_sweeps:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s, t = _rotation_coeffs(a[p, p], a[q, q], apq)
                app = a[p, p]
                aqq = a[q, q]
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[:, q] = new_q
                a[p, :] = new_p
                a[q, :] = new_q
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        sweeps += 1
        off = _max_offdiag_numpy(a)
    return off, sweeps


def _max_offdiag_numpy(a: np.ndarray) -> float:
    n = a.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    return float(np.abs(a[iu]).max())


if _USE_NUMBA:

    @njit(cache=True)
    def _jacobi_sweeps_numba(a, v, tol_abs, max_sweeps):  # pragma: no cover - numba path
        n = a.shape[0]
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                x = abs(a[i, j])
                if x > off:
                    off = x
        sweeps = 0
        while off > tol_abs and sweeps < max_sweeps:
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    aqq = a[q, q]
                    theta = 0.5 * (aqq - app) / apq
                    if abs(theta) > 1e154:
                        t = 0.5 / theta
                    elif theta >= 0.0:
                        t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for i in range(n):
                        aip = a[i, p]
                        aiq = a[i, q]
                        a[i, p] = c * aip - s * aiq
                        a[i, q] = s * aip + c * aiq
                    for i in range(n):
                        a[p, i] = a[i, p]
                        a[q, i] = a[i, q]
                    a[p, p] = app - t * apq
                    a[q, q] = aqq + t * apq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for i in range(n):
                        vip = v[i, p]
                        viq = v[i, q]
                        v[i, p] = c * vip - s * viq
                        v[i, q] = s * vip + c * viq
            sweeps += 1
            off = 0.0
            for i in range(n - 1):
                for j in range(i + 1, n):
                    x = abs(a[i, j])
                    if x > off:
                        off = x
        return off, sweeps


def jacobi_sweeps(a: np.ndarray, v: np.ndarray, tol_abs: float, max_sweeps: int) -> tuple[float, int]:
    """Dispatch cyclic Jacobi sweeps to the active backend (in place)."""
    if _USE_NUMBA:
        return _jacobi_sweeps_numba(a, v, tol_abs, max_sweeps)
    return _jacobi_sweeps_numpy(a, v, tol_abs, max_sweeps)
