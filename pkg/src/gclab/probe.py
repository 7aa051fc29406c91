"""Downstream evaluation: L2-regularized multinomial logistic regression on
frozen embeddings, trained by deterministic full-batch gradient descent with
backtracking line search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Split


class DegenerateSplitError(ValueError):
    pass


@dataclass
class ProbeModel:
    weights: np.ndarray  # (K, d)
    bias: np.ndarray  # (K,)
    l2: float
    iters_used: int
    final_loss: float
    grad_norm: float


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(w, b, h, y_onehot, l2):
    n = h.shape[0]
    probs = _softmax(h @ w.T + b)
    nll = -np.log(probs[np.arange(n), y_onehot.argmax(axis=1)]).mean()
    loss = nll + 0.5 * l2 * float((w * w).sum())
    g = (probs - y_onehot) / n
    d_w = g.T @ h + l2 * w
    d_b = g.sum(axis=0)
    return loss, d_w, d_b


def fit(
    h: np.ndarray,
    labels: np.ndarray,
    split: Split | None = None,
    l2: float = 1.0,
    iters: int = 500,
    tol: float = 1e-6,
) -> ProbeModel:
    """Minimize softmax cross-entropy + (l2/2)||W||^2 from zero init.

    Full-batch gradient descent; the step size is chosen by Armijo
    backtracking from a warm-started trial step, so two identical calls walk
    the exact same trajectory.  Stops when the gradient norm falls below
    ``tol`` or after ``iters`` steps.
    """
    h = np.asarray(h, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    ids = split.train_ids if split is not None else np.arange(h.shape[0])
    if ids.size == 0:
        raise DegenerateSplitError("train split is empty")
    ht = h[ids]
    yt = labels[ids]
    k = int(labels.max()) + 1
    if np.unique(yt).size < 2:
        raise DegenerateSplitError("train split needs at least 2 classes")
    y_onehot = np.zeros((ids.size, k))
    y_onehot[np.arange(ids.size), yt] = 1.0

    w = np.zeros((k, h.shape[1]))
    b = np.zeros(k)
    loss, d_w, d_b = _loss_and_grad(w, b, ht, y_onehot, l2)
    step = 1.0
    it = 0
    grad_norm = float(np.sqrt((d_w * d_w).sum() + (d_b * d_b).sum()))
    while it < iters and grad_norm > tol:
        g_sq = grad_norm * grad_norm
        t = min(step * 2.0, 1e6)
        while True:
            trial_loss, _, _ = _loss_and_grad(w - t * d_w, b - t * d_b, ht, y_onehot, l2)
            if trial_loss <= loss - 1e-4 * t * g_sq or t < 1e-18:
                break
            t *= 0.5
        w = w - t * d_w
        b = b - t * d_b
        step = t
        loss, d_w, d_b = _loss_and_grad(w, b, ht, y_onehot, l2)
        grad_norm = float(np.sqrt((d_w * d_w).sum() + (d_b * d_b).sum()))
        it += 1
    return ProbeModel(weights=w, bias=b, l2=l2, iters_used=it, final_loss=loss, grad_norm=grad_norm)


def predict_proba(model: ProbeModel, h: np.ndarray) -> np.ndarray:
    return _softmax(np.asarray(h, dtype=np.float64) @ model.weights.T + model.bias)


def accuracy(model: ProbeModel, h: np.ndarray, labels: np.ndarray, ids: np.ndarray | None = None) -> float:
    """Argmax accuracy over ``ids`` (ties go to the lowest class index)."""
    if ids is None:
        ids = np.arange(h.shape[0])
    preds = predict_proba(model, h[ids]).argmax(axis=1)
    return float((preds == np.asarray(labels)[ids]).mean())
