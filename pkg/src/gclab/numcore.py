"""Dense float64 numeric core: products, nonlinearity, row normalization,
symmetric eigendecomposition, and Adam.

Matrices are plain C-order ``numpy.ndarray`` of dtype float64 throughout the
package; there is no wrapper type.  Everything here is a pure function of
its inputs (plus an explicit optimizer state), with no global mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import jacobi_sweeps


class ShapeError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Eigensolver failed to converge; carries the off-diagonal residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (off-diagonal residual {residual:.3e})")
        self.residual = residual


def as_matrix(a) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={out.ndim}")
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape} not conformable")
    return a @ b


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(as_matrix(a), 0.0)


def row_unit_normalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale every row to unit L2 norm.

    All-zero rows are left as zero and flagged; returns (normalized, zero_rows).
    """
    a = as_matrix(a)
    norms = np.sqrt((a * a).sum(axis=1))
    zero_rows = norms == 0.0
    safe = np.where(zero_rows, 1.0, norms)
    return a / safe[:, None], zero_rows


@dataclass
class EigenDecomp:
    """Eigenvalues ascending; eigenvectors as orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


def eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 60) -> EigenDecomp:
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    The input must be symmetric within 1e-10 (it is symmetrized internally
    as (A + A^T)/2).  Eigenvector signs are fixed so the largest-magnitude
    entry of each vector is positive; columns are sorted by ascending
    eigenvalue with index order breaking ties, so the result is fully
    deterministic.

    Raises ConvergenceError if the off-diagonal residual does not fall
    below ``tol * max|A|`` within ``max_sweeps`` sweeps.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if n != a.shape[1]:
        raise ShapeError(f"eigh needs a square matrix, got {a.shape}")
    asym = float(np.abs(a - a.T).max()) if n else 0.0
    if asym > 1e-10:
        raise ShapeError(f"matrix not symmetric: max |A - A^T| = {asym:.3e}")
    work = 0.5 * (a + a.T)
    scale = float(np.abs(work).max()) if n else 0.0
    v = np.eye(n)
    if n > 1 and scale > 0.0:
        off, sweeps = jacobi_sweeps(work, v, tol * scale, max_sweeps)
        if off > tol * scale:
            raise ConvergenceError(f"jacobi did not converge in {max_sweeps} sweeps", off)
    else:
        sweeps = 0
    vals = np.diag(work).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    for j in range(n):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return EigenDecomp(eigenvalues=vals, eigenvectors=vecs, sweeps=sweeps)


@dataclass
class AdamState:
    """Adam moments for a list of parameter arrays.

    Weight decay is applied as an L2 gradient term (g + wd * p) before the
    moment updates, matching the conventional Adam(weight_decay=...) setup.
    """

    lr: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure(self, params: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        for p, m in zip(params, self.m):
            if p.shape != m.shape:
                raise ShapeError(f"adam moment shape {m.shape} != param shape {p.shape}")


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One Adam update; returns new parameter arrays (inputs untouched)."""
    if len(params) != len(grads):
        raise ShapeError("params and grads length mismatch")
    state._ensure(params)
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.shape}")
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * p
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
