"""Diagnostics tying training to downstream behaviour: class centers, center
distances, augmentation distance, divergences, the mean-CE generalization
bound, the trace alignment identity, and label-consistency KL.

All quantities are empirical expectations over the given arrays; every
function is deterministic in its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import probe as probe_mod
from .encoder import EncoderParams, gcn_forward
from .graph import Graph, sym_normalize


@dataclass
class ClassCenters:
    mu: np.ndarray  # (K, d)
    mu_global: np.ndarray  # (d,) class-frequency-weighted mean of centers
    counts: np.ndarray  # (K,)


@dataclass
class BoundReport:
    lhs_mean_ce: float
    nce_loss: float
    delta_aug: float
    var_pos_given_y: float
    var_orig_given_y: float
    var_mu: float
    num_negatives: int
    num_classes: int
    rhs: float
    margin: float
    slack_term: float


def class_centers(h0: np.ndarray, h1: np.ndarray, h2: np.ndarray, labels: np.ndarray) -> ClassCenters:
    """mu_y = 1/3 mean(original view) + 2/3 mean(both augmented views)."""
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    d = h0.shape[1]
    mu = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for y in range(k):
        sel = labels == y
        counts[y] = int(sel.sum())
        if counts[y] == 0:
            raise ValueError(f"class {y} has no nodes")
        aug = np.concatenate([h1[sel], h2[sel]], axis=0)
        mu[y] = h0[sel].mean(axis=0) / 3.0 + aug.mean(axis=0) * (2.0 / 3.0)
    weights = counts / counts.sum()
    return ClassCenters(mu=mu, mu_global=weights @ mu, counts=counts)


def center_distances(h0: np.ndarray, centers: ClassCenters, labels: np.ndarray) -> tuple[float, float]:
    """(positive center distance, negative center distance).

    PCD averages each node's distance to its own class center; NCD averages
    over nodes and uniformly over the other classes.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = centers.mu.shape[0]
    if k < 2:
        raise ValueError("negative center distance needs at least 2 classes")
    diffs = h0[:, None, :] - centers.mu[None, :, :]  # (N, K, d)
    dists = np.sqrt((diffs * diffs).sum(axis=2))
    own = dists[np.arange(len(labels)), labels]
    pcd = float(own.mean())
    ncd = float(((dists.sum(axis=1) - own) / (k - 1)).mean())
    return pcd, ncd


def delta_aug_hat(h0: np.ndarray, h1: np.ndarray, h2: np.ndarray) -> float:
    """Root mean squared distance between original and augmented embeddings,
    pooled over both views."""
    sq1 = ((h0 - h1) ** 2).sum(axis=1)
    sq2 = ((h0 - h2) ** 2).sum(axis=1)
    return float(np.sqrt(np.concatenate([sq1, sq2]).mean()))


def class_divergences(h0: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(intra-class, inter-class) root mean squared pairwise distance.

    Intra averages uniformly over classes then over ordered pairs i != j
    (classes with a single node are skipped with a warning); inter averages
    uniformly over ordered class pairs then node pairs.  Rows must be unit
    norm; the closed forms below rely on it.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    sums = np.zeros((k, h0.shape[1]))
    counts = np.zeros(k)
    for y in range(k):
        sel = labels == y
        counts[y] = sel.sum()
        sums[y] = h0[sel].sum(axis=0)

    intra_terms = []
    for y in range(k):
        m = counts[y]
        if m < 2:
            warnings.warn(f"class {y} has a single node; skipped in intra-class divergence")
            continue
        total = 2.0 * m * m - 2.0 * float(sums[y] @ sums[y])  # ordered pairs incl. i == j
        intra_terms.append(total / (m * m - m))
    if not intra_terms:
        raise ValueError("no class has 2+ nodes; intra-class divergence undefined")
    delta_plus = float(np.sqrt(np.mean(intra_terms)))

    if k < 2:
        raise ValueError("inter-class divergence needs at least 2 classes")
    inter_terms = []
    for y in range(k):
        for y2 in range(k):
            if y2 == y:
                continue
            inter_terms.append(2.0 - 2.0 * float(sums[y] @ sums[y2]) / (counts[y] * counts[y2]))
    delta_minus = float(np.sqrt(np.mean(inter_terms)))
    return delta_plus, delta_minus


def mean_ce(h0: np.ndarray, centers: ClassCenters, labels: np.ndarray) -> float:
    """Cross-entropy of the mean classifier whose weights are the class
    centers, with log-sum-exp stabilization."""
    labels = np.asarray(labels, dtype=np.int64)
    logits = h0 @ centers.mu.T
    rowmax = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - rowmax).sum(axis=1)) + rowmax[:, 0]
    return float((lse - logits[np.arange(len(labels)), labels]).mean())


def bound_report(
    h0: np.ndarray,
    h1: np.ndarray,
    h2: np.ndarray,
    labels: np.ndarray,
    nce_loss: float,
    num_negatives: int,
    num_classes: int,
) -> BoundReport:
    """Evaluate both sides of the generalization lower bound

        mean_CE >= L_NCE - 3 d^2 - 2 d - log(M/K) - var(f(v+)|y)/2
                   - sqrt(var(f(v0)|y)) - e var(mu_y) - O(M^-1/2)

    The unknowable O(M^-1/2) constant is taken as 1.0 for pass/fail use;
    the raw margin (lhs - rhs, without the slack) is always reported.
    ``nce_loss`` must be the tau=1 loss with negatives from both views.
    """
    labels = np.asarray(labels, dtype=np.int64)
    centers = class_centers(h0, h1, h2, labels)
    delta = delta_aug_hat(h0, h1, h2)
    mu_of = centers.mu[labels]
    var_orig = float(((h0 - mu_of) ** 2).sum(axis=1).mean())
    sq_pos = np.concatenate([((h1 - mu_of) ** 2).sum(axis=1), ((h2 - mu_of) ** 2).sum(axis=1)])
    var_pos = float(sq_pos.mean())
    weights = centers.counts / centers.counts.sum()
    var_mu = float((weights * ((centers.mu - centers.mu_global) ** 2).sum(axis=1)).sum())
    lhs = mean_ce(h0, centers, labels)
    rhs = (
        nce_loss
        - 3.0 * delta * delta
        - 2.0 * delta
        - np.log(num_negatives / num_classes)
        - 0.5 * var_pos
        - np.sqrt(var_orig)
        - np.e * var_mu
    )
    return BoundReport(
        lhs_mean_ce=lhs,
        nce_loss=nce_loss,
        delta_aug=delta,
        var_pos_given_y=var_pos,
        var_orig_given_y=var_orig,
        var_mu=var_mu,
        num_negatives=num_negatives,
        num_classes=num_classes,
        rhs=float(rhs),
        margin=float(lhs - rhs),
        slack_term=float(num_negatives ** -0.5),
    )


def alignment_identity(h1: np.ndarray, h2: np.ndarray) -> tuple[float, float]:
    """Both sides of E||f1 - f2||^2 = 2 - (2/N) tr(H1^T H2) for unit rows."""
    n = h1.shape[0]
    lhs = float(((h1 - h2) ** 2).sum(axis=1).mean())
    rhs = float(2.0 - (2.0 / n) * (h1 * h2).sum())
    return lhs, rhs


def theorem24_check(
    pcd: float, ncd: float, delta_y_plus: float, delta_y_minus: float, delta_aug: float
) -> tuple[float, float]:
    """Slack of the proved center-distance bounds (coefficient 1 on
    delta_aug); both slacks should be >= 0 up to rounding."""
    return (delta_y_plus + delta_aug) - pcd, (delta_y_minus + delta_aug) - ncd


def label_consistency_kl(
    params: EncoderParams,
    probe_model: probe_mod.ProbeModel,
    g: Graph,
    a_view: np.ndarray,
    x_view: np.ndarray,
) -> float:
    """Mean KL(p_clean || p_view) of frozen encoder+probe predictions on the
    clean graph versus an augmented view."""
    h_clean, _ = gcn_forward(sym_normalize(g.adjacency, add_self_loops=True), g.features, params)
    h_view, _ = gcn_forward(sym_normalize(a_view, add_self_loops=True), x_view, params)
    p = probe_mod.predict_proba(probe_model, h_clean)
    q = probe_mod.predict_proba(probe_model, h_view)
    kl = (p * (np.log(p) - np.log(q))).sum(axis=1)
    return float(kl.mean())
