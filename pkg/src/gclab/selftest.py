"""Quick self-contained property checks, runnable without pytest via
``gclab selftest``.  Each check prints one PASS/FAIL line."""

from __future__ import annotations

import numpy as np

from . import augment, contrastive, metrics, numcore
from .encoder import gcn_backward, gcn_forward, gradient_check, init_params
from .graph import sbm_generate, sym_normalize
from .kernels import backend
from .rng import Rng


def _check_eigh() -> bool:
    rng = Rng(11)
    for n in (3, 8, 24):
        a = rng.gaussian((n, n))
        a = 0.5 * (a + a.T)
        dec = numcore.eigh(a)
        recon = dec.eigenvectors @ np.diag(dec.eigenvalues) @ dec.eigenvectors.T
        if np.abs(recon - a).max() > 1e-8 * max(1.0, np.linalg.norm(a)):
            return False
        if np.abs(dec.eigenvectors.T @ dec.eigenvectors - np.eye(n)).max() > 1e-8:
            return False
    return True


def _check_matmul() -> bool:
    rng = Rng(12)
    a = rng.gaussian((5, 4))
    b = rng.gaussian((4, 3))
    naive = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(4):
                naive[i, j] += a[i, k] * b[k, j]
    return np.abs(numcore.matmul(a, b) - naive).max() < 1e-12


def _check_encoder_gradients() -> bool:
    rng = Rng(13)
    g = sbm_generate([5, 5], 0.5, 0.1, 4, 1.0, seed=3)
    a_norm = sym_normalize(g.adjacency, add_self_loops=True)
    params = init_params(4, 6, 3, 2, rng)
    target = rng.gaussian((g.n, 3))

    def objective(arrays):
        p = type(params)([arrays[0], arrays[1]])
        h, cache = gcn_forward(a_norm, g.features, p)
        loss = 0.5 * float(((h - target) ** 2).sum())
        d_ws, _ = gcn_backward(cache, p, h - target)
        pattern = np.concatenate([(x > 0).ravel() for x in cache.preacts[:-1]])
        return loss, d_ws, pattern

    rep = gradient_check(objective, [w.copy() for w in params.weights], step=1e-6)
    return rep.max_rel_err < 1e-4


def _check_info_nce() -> bool:
    h = np.tile(np.array([[1.0, 0.0]]), (4, 1))
    cfg = contrastive.NceConfig(tau=1.0, negative_mode=contrastive.INTER_ONLY)
    res = contrastive.info_nce(h, h.copy(), cfg)
    return abs(res.loss - np.log(4.0)) < 1e-12


def _check_mask_truth_table() -> bool:
    for m in (False, True):
        for s in (False, True):
            for d in (False, True):
                plan = augment.ViewPlan(
                    edges=np.array([[0, 1]]),
                    edge_keep=np.array([m]),
                    feat_keep=np.array([m]),
                )
                combined = augment.combine_masks(
                    plan, np.array([s]), np.array([s]), np.array([d]), np.array([d])
                )
                if combined.edge_keep[0] != ((m or s) and d):
                    return False
    return True


def _check_theta_trace() -> bool:
    rng = Rng(14)
    h1, _ = numcore.row_unit_normalize(rng.gaussian((6, 3)))
    h2, _ = numcore.row_unit_normalize(rng.gaussian((6, 3)))
    sym = rng.gaussian((6, 6))
    u = numcore.eigh(0.5 * (sym + sym.T)).eigenvectors
    theta = augment.estimate_thetas(h1, h2, u)
    return abs(theta.sum() - np.trace(h1.T @ h2)) < 1e-9


def _check_alignment_identity() -> bool:
    rng = Rng(15)
    h1, _ = numcore.row_unit_normalize(rng.gaussian((10, 4)))
    h2, _ = numcore.row_unit_normalize(rng.gaussian((10, 4)))
    lhs, rhs = metrics.alignment_identity(h1, h2)
    return abs(lhs - rhs) < 1e-12


def _check_adam() -> bool:
    state = numcore.AdamState(lr=0.1)
    (new,) = numcore.adam_step(state, [np.array([[1.0]])], [np.array([[1.0]])])
    return abs(new[0, 0] - (1.0 - 0.1 / (1.0 + 1e-8))) < 1e-12


def _check_rng_determinism() -> bool:
    a = Rng(99).gaussian(10)
    b = Rng(99).gaussian(10)
    return np.array_equal(a, b)


CHECKS = [
    ("eigh reconstruction + orthonormality", _check_eigh),
    ("matmul vs naive triple loop", _check_matmul),
    ("encoder gradients vs finite differences", _check_encoder_gradients),
    ("info_nce uniform case = log 4", _check_info_nce),
    ("mask truth table (M or S) and D", _check_mask_truth_table),
    ("theta trace identity", _check_theta_trace),
    ("alignment identity", _check_alignment_identity),
    ("adam first-step size", _check_adam),
    ("rng seed determinism", _check_rng_determinism),
]


def run_selftest() -> int:
    print(f"kernel backend: {backend()}")
    failures = 0
    for name, fn in CHECKS:
        try:
            ok = fn()
        except Exception as exc:  # a crash is a failure, keep going
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0
