"""L-layer GCN encoder with manual forward/backward.

Forward: H_l = ReLU(A_hat H_{l-1} W_l) for l < L, linear final layer,
then row unit normalization (all-zero rows are flagged and passed through).
Backward produces exact reverse-mode gradients for every weight matrix and
for the input features, which the importance-guided augmentation needs.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .numcore import ShapeError, row_unit_normalize
from .rng import Rng

_CKPT_MAGIC = b"GCLENC01"


class NumericsError(RuntimeError):
    pass


@dataclass
class EncoderParams:
    """Weight matrices of shapes (F x h), (h x h) ..., (h x d)."""

    weights: list[np.ndarray]

    def __post_init__(self):
        if not self.weights:
            raise ShapeError("encoder needs at least one layer")
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[1] != self.weights[i + 1].shape[0]:
                raise ShapeError(
                    f"layer {i} output dim {self.weights[i].shape[1]} does not feed layer {i + 1}"
                )

    @property
    def layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "EncoderParams":
        return EncoderParams([w.copy() for w in self.weights])


def init_params(num_features: int, hidden_dim: int, out_dim: int, layers: int, rng: Rng) -> EncoderParams:
    """Symmetric uniform init scaled by 1/sqrt(fan_in)."""
    if layers < 1:
        raise ShapeError("layers must be >= 1")
    dims = [num_features] + [hidden_dim] * (layers - 1) + [out_dim]
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append((rng.uniform((fan_in, fan_out)) * 2.0 - 1.0) * bound)
    return EncoderParams(weights)


@dataclass
class ForwardCache:
    a_norm: np.ndarray
    activations: list[np.ndarray] = field(default_factory=list)  # H_0 = X ... H_L prenorm
    propagated: list[np.ndarray] = field(default_factory=list)  # Z_l = A_hat H_{l-1}
    preacts: list[np.ndarray] = field(default_factory=list)  # P_l = Z_l W_l
    output: np.ndarray | None = None
    zero_rows: np.ndarray | None = None


def gcn_forward(a_norm: np.ndarray, x: np.ndarray, params: EncoderParams) -> tuple[np.ndarray, ForwardCache]:
    a_norm = np.asarray(a_norm, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a_norm.shape[0] != a_norm.shape[1] or a_norm.shape[0] != x.shape[0]:
        raise ShapeError(f"a_norm {a_norm.shape} does not match features {x.shape}")
    if x.shape[1] != params.in_dim:
        raise ShapeError(f"feature dim {x.shape[1]} != encoder input dim {params.in_dim}")
    cache = ForwardCache(a_norm=a_norm)
    cache.activations.append(x)
    h = x
    n_layers = params.layers
    for l, w in enumerate(params.weights, start=1):
        z = a_norm @ h
        p = z @ w
        if not np.isfinite(p).all():
            raise NumericsError(f"non-finite values in encoder layer {l}")
        h = np.maximum(p, 0.0) if l < n_layers else p
        cache.propagated.append(z)
        cache.preacts.append(p)
        cache.activations.append(h)
    out, zero_rows = row_unit_normalize(h)
    cache.output = out
    cache.zero_rows = zero_rows
    return out, cache


def gcn_backward(
    cache: ForwardCache, params: EncoderParams, d_out: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients (dW per layer, dX) for a loss with gradient ``d_out`` at the
    normalized output.  ReLU uses subgradient 0 at 0; flagged zero rows pass
    the gradient through unchanged."""
    d_out = np.asarray(d_out, dtype=np.float64)
    prenorm = cache.activations[-1]
    if d_out.shape != prenorm.shape:
        raise ShapeError(f"d_out shape {d_out.shape} != output shape {prenorm.shape}")
    norms = np.sqrt((prenorm * prenorm).sum(axis=1))
    y = cache.output
    # d/dx of x/||x||: (g - (g.y) y) / ||x||; identity on flagged rows
    gy = (d_out * y).sum(axis=1, keepdims=True)
    safe = np.where(cache.zero_rows, 1.0, norms)
    d_h = np.where(cache.zero_rows[:, None], d_out, (d_out - gy * y) / safe[:, None])

    n_layers = params.layers
    d_ws: list[np.ndarray] = [None] * n_layers
    for l in range(n_layers, 0, -1):
        if l < n_layers:
            d_h = d_h * (cache.preacts[l - 1] > 0.0)
        d_ws[l - 1] = cache.propagated[l - 1].T @ d_h
        d_z = d_h @ params.weights[l - 1].T
        d_h = cache.a_norm.T @ d_z
    return d_ws, d_h


@dataclass
class GradientCheckReport:
    max_rel_err: float
    checked: int
    skipped: int


def gradient_check(
    objective,
    arrays: list[np.ndarray],
    step: float = 1e-5,
    max_coords_per_array: int | None = None,
    rng: Rng | None = None,
) -> GradientCheckReport:
    """Compare analytic gradients with central finite differences.

    ``objective(arrays)`` must return ``(loss, grads, relu_pattern)`` where
    ``relu_pattern`` is a flat boolean array of ReLU activity.  Coordinates
    whose +step/-step evaluations disagree on the pattern sit on a kink and
    are excluded from the check.  Returns the max relative error
    |analytic - numeric| / max(1e-8, |numeric|) over checked coordinates.
    """
    _, grads, _ = objective(arrays)
    max_err = 0.0
    checked = 0
    skipped = 0
    for ai, base in enumerate(arrays):
        flat = base.reshape(-1)
        n = flat.size
        if max_coords_per_array is not None and n > max_coords_per_array:
            if rng is None:
                raise ValueError("rng required when subsampling coordinates")
            coords = rng.integers(0, n, size=max_coords_per_array)
        else:
            coords = np.arange(n)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + step
            loss_plus, _, pat_plus = objective(arrays)
            flat[k] = orig - step
            loss_minus, _, pat_minus = objective(arrays)
            flat[k] = orig
            if not np.array_equal(pat_plus, pat_minus):
                skipped += 1
                continue
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            analytic = grads[ai].reshape(-1)[k]
            err = abs(analytic - numeric) / max(1e-8, abs(numeric))
            max_err = max(max_err, err)
            checked += 1
    return GradientCheckReport(max_rel_err=max_err, checked=checked, skipped=skipped)


def save_checkpoint(path: str | os.PathLike, params: EncoderParams, hyper: dict) -> None:
    """Flat binary weights (magic, layer count, shapes, little-endian float64
    row-major data) plus a JSON sidecar ``<path>.json`` of hyperparameters."""
    path = os.fspath(path)
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", params.layers))
        for w in params.weights:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w in params.weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
    with open(path + ".json", "w") as fh:
        json.dump(hyper, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str | os.PathLike) -> tuple[EncoderParams, dict]:
    path = os.fspath(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not a gclab checkpoint")
        (layers,) = struct.unpack("<I", fh.read(4))
        shapes = [struct.unpack("<II", fh.read(8)) for _ in range(layers)]
        weights = []
        for rows, cols in shapes:
            buf = fh.read(rows * cols * 8)
            weights.append(np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy())
    sidecar = path + ".json"
    hyper = {}
    if os.path.isfile(sidecar):
        with open(sidecar) as fh:
            hyper = json.load(fh)
    return EncoderParams(weights), hyper
