"""View construction: random masking, gradient-importance-guided masking,
and eigenvalue smoothing of the propagation spectrum.

Mask composition uses keep = (M or S) and D per item: the retain matrix S
can save an item from the random drop M, but a forced delete D always wins.
Edges are masked symmetrically; features are masked per dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contrastive import NceConfig, info_nce
from .encoder import EncoderParams, gcn_backward, gcn_forward
from .graph import Graph, edge_list_of, sym_normalize
from .numcore import EigenDecomp, ShapeError, eigh
from .rng import Rng

WEIGHT_TRUNCATION = 1e-8


@dataclass
class ViewPlan:
    """Per-view keep decisions over a base adjacency's edge list and the
    feature dimensions."""

    edges: np.ndarray  # (E, 2) int, i < j
    edge_keep: np.ndarray  # (E,) bool
    feat_keep: np.ndarray  # (F,) bool
    source: str = "random"

    @property
    def edit_counts(self) -> tuple[int, int]:
        return int((~self.edge_keep).sum()), int((~self.feat_keep).sum())


def _base_adjacency(g) -> np.ndarray:
    return g.adjacency if isinstance(g, Graph) else np.asarray(g, dtype=np.float64)


def random_masks(g, p_edge: float, p_feat: float, rng: Rng, num_features: int | None = None) -> ViewPlan:
    """Independently drop each undirected edge w.p. ``p_edge`` and each
    feature dimension w.p. ``p_feat``."""
    if not (0.0 <= p_edge < 1.0 and 0.0 <= p_feat < 1.0):
        raise ValueError("mask probabilities must be in [0, 1)")
    adj = _base_adjacency(g)
    if num_features is None:
        if not isinstance(g, Graph):
            raise ValueError("num_features required when masking a bare adjacency")
        num_features = g.num_features
    edges = edge_list_of(adj)
    edge_keep = ~rng.bernoulli(p_edge, size=len(edges))
    feat_keep = ~rng.bernoulli(p_feat, size=num_features)
    return ViewPlan(edges=edges, edge_keep=edge_keep, feat_keep=feat_keep, source="random")


def combine_masks(
    plan: ViewPlan,
    s_edge: np.ndarray,
    s_feat: np.ndarray,
    d_edge: np.ndarray,
    d_feat: np.ndarray,
) -> ViewPlan:
    """Fold retain/delete matrices into a random plan: keep = (M or S) and D."""
    return ViewPlan(
        edges=plan.edges,
        edge_keep=(plan.edge_keep | s_edge) & d_edge,
        feat_keep=(plan.feat_keep | s_feat) & d_feat,
        source="info",
    )


def apply_masks(base_adjacency: np.ndarray, base_features: np.ndarray, plan: ViewPlan) -> tuple[np.ndarray, np.ndarray]:
    """Materialize a view: zero dropped edges (symmetrically) and dropped
    feature dimensions.  Never introduces an edge absent from the base."""
    a_view = np.array(base_adjacency, dtype=np.float64, copy=True)
    dropped = plan.edges[~plan.edge_keep]
    a_view[dropped[:, 0], dropped[:, 1]] = 0.0
    a_view[dropped[:, 1], dropped[:, 0]] = 0.0
    x_view = np.asarray(base_features, dtype=np.float64) * plan.feat_keep[None, :]
    return a_view, x_view


@dataclass
class ImportanceScores:
    """Gradient-based importance: per-entry, per-feature, per-node, per-edge.

    alpha_p / alpha_v / alpha_e are ReLU-clamped; edge importance is the
    mean of its endpoints' node importance.
    """

    alpha_vp: np.ndarray  # (N, F) raw dL/dx
    alpha_p: np.ndarray  # (F,) >= 0
    alpha_v: np.ndarray  # (N,) >= 0
    edges: np.ndarray  # (E, 2)
    alpha_e: np.ndarray  # (E,) >= 0

    def for_edges(self, edges: np.ndarray) -> "ImportanceScores":
        """Re-derive per-edge scores for a different edge list (the spectral
        strategy densifies the base graph, changing the edge set)."""
        alpha_e = 0.5 * (self.alpha_v[edges[:, 0]] + self.alpha_v[edges[:, 1]])
        return ImportanceScores(self.alpha_vp, self.alpha_p, self.alpha_v, edges, alpha_e)


def compute_importance(
    g: Graph,
    params: EncoderParams,
    cfg: NceConfig,
    rng: Rng,
    p_edge: float = 0.3,
    p_feat: float = 0.3,
) -> ImportanceScores:
    """One InfoNCE forward/backward on a fresh random view pair; the feature
    gradient is chained through the view masks back to the original feature
    matrix, then averaged into feature/node/edge scores."""
    plan1 = random_masks(g, p_edge, p_feat, rng)
    plan2 = random_masks(g, p_edge, p_feat, rng)
    grads = []
    caches = []
    for plan in (plan1, plan2):
        a_view, x_view = apply_masks(g.adjacency, g.features, plan)
        h, cache = gcn_forward(sym_normalize(a_view, add_self_loops=True), x_view, params)
        caches.append((h, cache))
    res = info_nce(caches[0][0], caches[1][0], cfg)
    for (h, cache), d_h, plan in zip(caches, (res.d_h1, res.d_h2), (plan1, plan2)):
        _, d_x = gcn_backward(cache, params, d_h)
        grads.append(d_x * plan.feat_keep[None, :])
    alpha_vp = grads[0] + grads[1]
    alpha_p = np.maximum(alpha_vp.mean(axis=0), 0.0)
    alpha_v = np.maximum(alpha_vp.mean(axis=1), 0.0)
    edges = g.edge_list()
    alpha_e = 0.5 * (alpha_v[edges[:, 0]] + alpha_v[edges[:, 1]])
    return ImportanceScores(alpha_vp=alpha_vp, alpha_p=alpha_p, alpha_v=alpha_v, edges=edges, alpha_e=alpha_e)


def _top_bottom(scores: np.ndarray, xi: float) -> tuple[np.ndarray, np.ndarray]:
    count = scores.size
    if xi == 0.0 or count == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    k_top = math.ceil(xi * count)
    idx = np.arange(count)
    by_desc = np.lexsort((idx, -scores))
    top = by_desc[:k_top]
    k_bot = min(math.ceil(2.0 * xi * count), count - k_top)
    in_top = np.zeros(count, dtype=bool)
    in_top[top] = True
    by_asc = np.lexsort((idx, scores))
    bottom = by_asc[~in_top[by_asc]][:k_bot]
    return top, bottom


def build_retain_delete(
    scores: ImportanceScores, xi: float, rng: Rng
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Retain/delete matrices (S_e, S_f, D_e, D_f) as boolean vectors.

    The top ceil(xi * count) items get S=1 with probability 1/2; the bottom
    ceil(2 xi * count) items (excluding the top set, ties broken by index)
    get D=0 with probability 1/2.  xi=0 degenerates to S all 0 / D all 1,
    i.e. pure random masking, and consumes no draws.
    """
    if not 0.0 <= xi <= 1.0 / 3.0:
        raise ValueError(f"xi must be in [0, 1/3], got {xi}")
    out = []
    for alpha in (scores.alpha_e, scores.alpha_p):
        top, bottom = _top_bottom(alpha, xi)
        s = np.zeros(alpha.size, dtype=bool)
        if top.size:
            s[top] = rng.bernoulli(0.5, size=top.size)
        d = np.ones(alpha.size, dtype=bool)
        if bottom.size:
            d[bottom] = ~rng.bernoulli(0.5, size=bottom.size)
        out.append((s, d))
    (s_e, d_e), (s_f, d_f) = out
    return s_e, s_f, d_e, d_f


@dataclass
class SpectralState:
    """Fixed eigenbasis of the base normalized adjacency plus the evolving
    eigenvalues, the previous theta vector, and the last update directions."""

    u: np.ndarray
    lam: np.ndarray
    alpha: float
    epsilon: float
    period: int
    mean_abs_weight_before: float
    theta_prev: np.ndarray | None = None
    directions_last: np.ndarray | None = None


def init_spectral_state(g: Graph, alpha: float, epsilon: float, period: int) -> SpectralState:
    """Eigendecompose the self-loop-free normalized adjacency once; the
    basis stays fixed for the whole run so theta_i and lambda_i keep a
    consistent indexing across epochs."""
    base = sym_normalize(g.adjacency, add_self_loops=False)
    nonzero = np.abs(base[base != 0.0])
    if nonzero.size == 0:
        raise ValueError("spectral augmentation needs a graph with at least one edge")
    dec: EigenDecomp = eigh(base)
    return SpectralState(
        u=dec.eigenvectors,
        lam=dec.eigenvalues.copy(),
        alpha=alpha,
        epsilon=epsilon,
        period=period,
        mean_abs_weight_before=float(nonzero.mean()),
    )


def estimate_thetas(h1: np.ndarray, h2: np.ndarray, u: np.ndarray) -> np.ndarray:
    """theta_i = u_i^T M u_i with M the symmetrized cross-view similarity
    (H1 H2^T + H2 H1^T)/2.  Satisfies sum(theta) == tr(H1^T H2) exactly."""
    m_hat = 0.5 * (h1 @ h2.T + h2 @ h1.T)
    return ((m_hat @ u) * u).sum(axis=0)


def update_lambdas(state: SpectralState, theta_cur: np.ndarray) -> np.ndarray:
    """Per-eigenvalue trend step: when theta_i rose by >= epsilon the
    smoothing is working, shrink lambda_i by a factor (1 - alpha); when it
    fell by >= epsilon, step back by (1 + alpha).  The first call only
    records theta."""
    theta_cur = np.asarray(theta_cur, dtype=np.float64)
    if state.theta_prev is None:
        state.theta_prev = theta_cur.copy()
        state.directions_last = np.zeros(theta_cur.size, dtype=np.int64)
        return state.lam
    d_theta = theta_cur - state.theta_prev
    direction = np.where(d_theta >= state.epsilon, -1, np.where(d_theta <= -state.epsilon, 1, 0))
    state.lam = state.lam + direction * state.lam * state.alpha
    state.theta_prev = theta_cur.copy()
    state.directions_last = direction.astype(np.int64)
    return state.lam


def rebuild_adjacency(state: SpectralState) -> tuple[np.ndarray, int]:
    """A_spec = U diag(lambda) U^T, symmetrized, zero diagonal, entries below
    the truncation threshold zeroed.  Returns (A_spec, negative entry count);
    negative weights are permitted but worth reporting."""
    a = state.u @ np.diag(state.lam) @ state.u.T
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 0.0)
    a[np.abs(a) < WEIGHT_TRUNCATION] = 0.0
    negatives = int((a < 0.0).sum() // 2)
    return a, negatives


def compensate_weight_change(a_spec: np.ndarray, baseline_mean: float, p_edge: float) -> float:
    """Rescale the edge-drop rate so the expected dropped weight matches the
    pre-smoothing budget; clamped to [0, 0.95]."""
    if baseline_mean <= 0.0:
        raise ValueError("baseline mean edge weight must be positive")
    nonzero = np.abs(a_spec[a_spec != 0.0])
    mean_now = float(nonzero.mean()) if nonzero.size else 0.0
    return float(np.clip(p_edge * mean_now / baseline_mean, 0.0, 0.95))


def predict_eigen_shift(
    u: np.ndarray, lam: np.ndarray, d_a1: np.ndarray, d_a2: np.ndarray
) -> np.ndarray:
    """First-order prediction of lambda'_i - lambda''_i for two perturbations
    of the same base matrix:

        sum_{m,n} u_i[m] dA[m][n] (u_i[n] - lambda_i u_i[m]),  dA = dA1 - dA2.

    The second term is the degree-renormalization correction; for it to
    carry the right constants the columns of ``u`` must be the base graph's
    degree-scaled eigenvectors (D^-1/2 v_i) when predicting shifts of a
    renormalized adjacency.
    """
    d_a = np.asarray(d_a1, dtype=np.float64) - np.asarray(d_a2, dtype=np.float64)
    if np.abs(d_a - d_a.T).max(initial=0.0) > 1e-9:
        raise ShapeError("perturbation difference must be symmetric")
    quad = ((d_a @ u) * u).sum(axis=0)
    row_sums = d_a.sum(axis=1)
    weighted = (u * u * row_sums[:, None]).sum(axis=0)
    return quad - np.asarray(lam, dtype=np.float64) * weighted
