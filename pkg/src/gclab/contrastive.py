"""InfoNCE loss with exact gradients, pair-similarity diagnostics, and the
mutual-information lower bound log(M) - loss.

The loss follows the GRACE objective: similarities are divided by the
temperature, the positive term sits in the denominator by default, both
anchor directions are averaged, and negatives may come from the other view
only or from both views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import ShapeError

INTER_ONLY = "inter_only"
INTER_AND_INTRA = "inter_and_intra"


@dataclass
class NceConfig:
    tau: float = 0.5
    negative_mode: str = INTER_AND_INTRA
    include_positive_in_denominator: bool = True

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.negative_mode not in (INTER_ONLY, INTER_AND_INTRA):
            raise ValueError(f"unknown negative_mode {self.negative_mode!r}")


@dataclass
class NceResult:
    loss: float
    d_h1: np.ndarray
    d_h2: np.ndarray
    num_negatives: int


def _check_unit_rows(h: np.ndarray, name: str) -> None:
    norms = np.sqrt((h * h).sum(axis=1))
    # all-zero rows are the encoder's flagged-zero convention and pass through
    bad = (np.abs(norms - 1.0) > 1e-6) & (norms > 1e-12)
    if bad.any():
        raise ShapeError(f"{name} has non-unit rows (first at index {int(np.argmax(bad))})")


def info_nce(h1: np.ndarray, h2: np.ndarray, cfg: NceConfig) -> NceResult:
    """Symmetric InfoNCE over two views of the same N nodes.

    Per anchor i in view 1 the positive is row i of view 2; negatives are
    the other view's N-1 non-matching rows, plus the anchor's own view's
    N-1 other rows under ``inter_and_intra``.  Loss is averaged over
    anchors and both directions; gradients are exact.
    """
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape or h1.ndim != 2:
        raise ShapeError(f"view shapes differ: {h1.shape} vs {h2.shape}")
    _check_unit_rows(h1, "h1")
    _check_unit_rows(h2, "h2")
    n = h1.shape[0]
    if n < 2:
        raise ShapeError("need at least 2 nodes for a negative set")
    intra = cfg.negative_mode == INTER_AND_INTRA
    m = (2 * n - 2) if intra else (n - 1)

    d_h1 = np.zeros_like(h1)
    d_h2 = np.zeros_like(h2)
    loss = 0.0
    for anchor, other, d_anchor, d_other in ((h1, h2, d_h1, d_h2), (h2, h1, d_h2, d_h1)):
        s_cross = anchor @ other.T / cfg.tau
        blocks = [s_cross]
        if intra:
            s_own = anchor @ anchor.T / cfg.tau
            blocks.append(s_own)
        logits = np.concatenate(blocks, axis=1)

        valid = np.ones_like(logits, dtype=bool)
        if not cfg.include_positive_in_denominator:
            valid[np.arange(n), np.arange(n)] = False
        if intra:
            valid[np.arange(n), n + np.arange(n)] = False  # own-view self term

        shifted = np.where(valid, logits, -np.inf)
        rowmax = shifted.max(axis=1, keepdims=True)
        expv = np.where(valid, np.exp(shifted - rowmax), 0.0)
        denom = expv.sum(axis=1, keepdims=True)
        lse = np.log(denom[:, 0]) + rowmax[:, 0]
        pos = np.diag(s_cross)
        loss += float(np.mean(lse - pos))

        w = expv / denom
        g_cross = w[:, :n].copy()
        g_cross[np.arange(n), np.arange(n)] -= 1.0
        scale = 1.0 / (2.0 * n * cfg.tau)
        d_anchor += scale * (g_cross @ other)
        d_other += scale * (g_cross.T @ anchor)
        if intra:
            w_own = w[:, n:]
            d_anchor += scale * (w_own @ anchor + w_own.T @ anchor)
    return NceResult(loss=loss / 2.0, d_h1=d_h1, d_h2=d_h2, num_negatives=m)


def pair_similarities(h1: np.ndarray, h2: np.ndarray) -> tuple[float, float]:
    """(mean positive similarity, mean inter-view negative similarity)."""
    sims = np.asarray(h1) @ np.asarray(h2).T
    n = sims.shape[0]
    mean_pos = float(np.trace(sims) / n)
    if n < 2:
        return mean_pos, 0.0
    mean_neg = float((sims.sum() - np.trace(sims)) / (n * (n - 1)))
    return mean_pos, mean_neg


def mi_lower_bound(loss: float, m: int) -> float:
    """InfoNCE bound on the mutual information between views: log(M) - loss.

    Can go negative (the bound is then vacuous); callers plot it as-is.
    """
    if m < 1:
        raise ValueError(f"need at least one negative sample, got M={m}")
    return float(np.log(m) - loss)
