"""Training orchestration for grace / grace_i / grace_s / grace_is, plus the
drop-rate and depth sweeps and CSV/JSON reporting.

Randomness is hierarchically split: one root seed spawns independent
substreams for weight init, per-epoch view 1 masks, per-epoch view 2 masks,
and the retain/delete draws (which also cover the importance probe views).
grace_i with xi=0 therefore consumes the view streams exactly like grace and
produces an identical metrics CSV.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import augment, metrics as metrics_mod, probe as probe_mod
from .config import RunConfig
from .contrastive import INTER_AND_INTRA, NceConfig, info_nce, mi_lower_bound, pair_similarities
from .encoder import EncoderParams, NumericsError, gcn_backward, gcn_forward, init_params, save_checkpoint
from .graph import Graph, load_dataset, make_split, sbm_generate, sym_normalize
from .numcore import AdamState, adam_step
from .rng import Rng

CSV_SCHEMA_LINE = "# gclab-metrics-v1"
CSV_COLUMNS = [
    "epoch",
    "nce_loss",
    "mi_hat",
    "delta_aug",
    "pcd",
    "ncd",
    "delta_y_plus",
    "delta_y_minus",
    "mean_ce",
    "bound_nce",
    "bound_margin",
    "bound_m",
    "slack_pos",
    "slack_neg",
    "align_lhs",
    "align_rhs",
    "pos_sim",
    "neg_sim",
    "edges_removed_1",
    "feats_masked_1",
    "edges_removed_2",
    "feats_masked_2",
    "probe_acc",
]


@dataclass
class MetricsRecord:
    epoch: int
    nce_loss: float
    mi_hat: float
    delta_aug: float
    pcd: float
    ncd: float
    delta_y_plus: float
    delta_y_minus: float
    mean_ce: float
    bound_nce: float
    bound_margin: float
    bound_m: int
    slack_pos: float
    slack_neg: float
    align_lhs: float
    align_rhs: float
    pos_sim: float
    neg_sim: float
    edges_removed_1: int
    feats_masked_1: int
    edges_removed_2: int
    feats_masked_2: int
    probe_acc: float | None = None


@dataclass
class TrainResult:
    method: str
    seed: int
    records: list[MetricsRecord]
    params: EncoderParams
    probe_train_acc: float
    probe_test_acc: float
    wall_seconds: float
    aborted_epoch: int | None = None
    csv_path: str | None = None
    checkpoint_path: str | None = None


def build_graph(cfg: RunConfig) -> Graph:
    if cfg.dataset == "sbm":
        return sbm_generate(
            cfg.sbm_block_sizes,
            cfg.sbm_p_in,
            cfg.sbm_p_out,
            cfg.sbm_feat_dim,
            cfg.sbm_feat_shift,
            cfg.sbm_seed,
        )
    return load_dataset(cfg.dataset)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % value


def write_metrics_csv(path: str, records: list[MetricsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA_LINE + "\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])


def read_metrics_csv(path: str) -> list[dict]:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != CSV_SCHEMA_LINE:
            raise ValueError(f"{path}: unknown metrics schema {first!r}")
        rows = list(csv.DictReader(fh))
    return rows


def train(cfg: RunConfig, seed: int, out_dir: str | None = None, graph: Graph | None = None) -> TrainResult:
    """One full training run; fully determined by (cfg, seed)."""
    cfg.validate()
    t_start = time.perf_counter()
    g = graph if graph is not None else build_graph(cfg)
    spectral = cfg.method in ("grace_s", "grace_is")
    info = cfg.method in ("grace_i", "grace_is")
    if spectral and g.n > cfg.spectral_node_ceiling:
        raise ValueError(
            f"spectral augmentation refused for n={g.n} > ceiling {cfg.spectral_node_ceiling} "
            "(dense eigendecomposition; raise spectral_node_ceiling to override)"
        )

    root = Rng(seed)
    rng_init, rng_view1, rng_view2, rng_sd = root.split(4)
    nce_cfg = NceConfig(tau=cfg.tau, negative_mode=INTER_AND_INTRA, include_positive_in_denominator=True)
    bound_cfg = NceConfig(tau=1.0, negative_mode=INTER_AND_INTRA, include_positive_in_denominator=True)

    params = init_params(g.num_features, cfg.hidden_dim, cfg.out_dim, cfg.layers, rng_init)
    adam = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    a_clean = sym_normalize(g.adjacency, add_self_loops=True)

    state = None
    base_adj = g.adjacency
    p_edge_eff = (cfg.p_edge_1, cfg.p_edge_2)
    if spectral:
        state = augment.init_spectral_state(g, cfg.alpha, cfg.epsilon, cfg.spectral_period)
        base_adj, _ = augment.rebuild_adjacency(state)
        p_edge_eff = tuple(
            augment.compensate_weight_change(base_adj, state.mean_abs_weight_before, p)
            for p in (cfg.p_edge_1, cfg.p_edge_2)
        )

    scores = None
    edge_scores = None
    records: list[MetricsRecord] = []
    aborted_epoch = None
    prev_views = None

    for epoch in range(cfg.epochs):
        if spectral and epoch > 0 and epoch % cfg.spectral_period == 0 and prev_views is not None:
            theta = augment.estimate_thetas(prev_views[0], prev_views[1], state.u)
            augment.update_lambdas(state, theta)
            base_adj, _ = augment.rebuild_adjacency(state)
            p_edge_eff = tuple(
                augment.compensate_weight_change(base_adj, state.mean_abs_weight_before, p)
                for p in (cfg.p_edge_1, cfg.p_edge_2)
            )
            edge_scores = None  # edge set may have changed

        if info and epoch == cfg.warmup_epoch:
            scores = augment.compute_importance(
                g, params, nce_cfg, rng_sd, p_edge=cfg.p_edge_1, p_feat=cfg.p_feat_1
            )
            edge_scores = None

        plans = [
            augment.random_masks(base_adj, p_edge_eff[0], cfg.p_feat_1, rng_view1, g.num_features),
            augment.random_masks(base_adj, p_edge_eff[1], cfg.p_feat_2, rng_view2, g.num_features),
        ]
        if scores is not None and epoch >= cfg.warmup_epoch:
            if edge_scores is None:
                edge_scores = scores.for_edges(plans[0].edges)
            plans = [
                augment.combine_masks(plan, *augment.build_retain_delete(edge_scores, cfg.xi, rng_sd))
                for plan in plans
            ]

        views = []
        try:
            for plan in plans:
                a_v, x_v = augment.apply_masks(base_adj, g.features, plan)
                h, cache = gcn_forward(sym_normalize(a_v, add_self_loops=True), x_v, params)
                views.append((h, cache))
            res = info_nce(views[0][0], views[1][0], nce_cfg)
            if not np.isfinite(res.loss):
                raise NumericsError(f"non-finite loss at epoch {epoch}")
        except NumericsError:
            aborted_epoch = epoch
            break

        log_now = (epoch + 1) % cfg.log_every == 0 or epoch == cfg.epochs - 1
        if log_now:
            records.append(
                _make_record(epoch, g, a_clean, params, views[0][0], views[1][0], res, plans, bound_cfg)
            )

        grads1, _ = gcn_backward(views[0][1], params, res.d_h1)
        grads2, _ = gcn_backward(views[1][1], params, res.d_h2)
        grads = [g1 + g2 for g1, g2 in zip(grads1, grads2)]
        params = EncoderParams(adam_step(adam, params.weights, grads))
        prev_views = (views[0][0], views[1][0])

    h0, _ = gcn_forward(a_clean, g.features, params)
    split = make_split(g, cfg.train_frac, seed)
    try:
        model = probe_mod.fit(h0, g.labels, split, l2=cfg.probe_l2, iters=cfg.probe_iters, tol=cfg.probe_tol)
        train_acc = probe_mod.accuracy(model, h0, g.labels, split.train_ids)
        test_acc = probe_mod.accuracy(model, h0, g.labels, split.test_ids)
    except probe_mod.DegenerateSplitError:
        train_acc = test_acc = float("nan")
    if records:
        records[-1].probe_acc = test_acc

    result = TrainResult(
        method=cfg.method,
        seed=seed,
        records=records,
        params=params,
        probe_train_acc=train_acc,
        probe_test_acc=test_acc,
        wall_seconds=time.perf_counter() - t_start,
        aborted_epoch=aborted_epoch,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.csv_path = os.path.join(out_dir, f"metrics_{cfg.method}_{seed}.csv")
        write_metrics_csv(result.csv_path, records)
        result.checkpoint_path = os.path.join(out_dir, f"checkpoint_{cfg.method}_{seed}.bin")
        hyper = dataclasses.asdict(cfg) | {
            "seed": seed,
            "probe_test_acc": test_acc,
            "wall_seconds": result.wall_seconds,
            "aborted_epoch": aborted_epoch,
        }
        save_checkpoint(result.checkpoint_path, params, hyper)
    return result


def _make_record(
    epoch: int,
    g: Graph,
    a_clean: np.ndarray,
    params: EncoderParams,
    h1: np.ndarray,
    h2: np.ndarray,
    res,
    plans,
    bound_cfg: NceConfig,
) -> MetricsRecord:
    h0, _ = gcn_forward(a_clean, g.features, params)
    centers = metrics_mod.class_centers(h0, h1, h2, g.labels)
    pcd, ncd = metrics_mod.center_distances(h0, centers, g.labels)
    delta = metrics_mod.delta_aug_hat(h0, h1, h2)
    dyp, dym = metrics_mod.class_divergences(h0, g.labels)
    bound_nce = info_nce(h1, h2, bound_cfg)
    report = metrics_mod.bound_report(
        h0, h1, h2, g.labels, bound_nce.loss, bound_nce.num_negatives, g.num_classes
    )
    slack_pos, slack_neg = metrics_mod.theorem24_check(pcd, ncd, dyp, dym, delta)
    align_lhs, align_rhs = metrics_mod.alignment_identity(h1, h2)
    pos_sim, neg_sim = pair_similarities(h1, h2)
    e1, f1 = plans[0].edit_counts
    e2, f2 = plans[1].edit_counts
    return MetricsRecord(
        epoch=epoch,
        nce_loss=res.loss,
        mi_hat=mi_lower_bound(res.loss, res.num_negatives),
        delta_aug=delta,
        pcd=pcd,
        ncd=ncd,
        delta_y_plus=dyp,
        delta_y_minus=dym,
        mean_ce=report.lhs_mean_ce,
        bound_nce=report.nce_loss,
        bound_margin=report.margin,
        bound_m=report.num_negatives,
        slack_pos=slack_pos,
        slack_neg=slack_neg,
        align_lhs=align_lhs,
        align_rhs=align_rhs,
        pos_sim=pos_sim,
        neg_sim=neg_sim,
        edges_removed_1=e1,
        feats_masked_1=f1,
        edges_removed_2=e2,
        feats_masked_2=f2,
    )


def _train_job(cfg: RunConfig, seed: int, out_dir: str | None) -> TrainResult:
    return train(cfg, seed, out_dir)


def train_many(cfg: RunConfig, out_dir: str | None = None, workers: int = 1) -> list[TrainResult]:
    """Run cfg.seeds; with workers > 1 the seeds run in separate processes
    (shared-nothing, so outputs match the sequential ones exactly)."""
    if workers <= 1:
        return [train(cfg, seed, out_dir) for seed in cfg.seeds]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_train_job, cfg, seed, out_dir) for seed in cfg.seeds]
        return [f.result() for f in futures]


def sweep_droprate(cfg: RunConfig, rates: list[float], out_dir: str | None = None, workers: int = 1) -> list[dict]:
    """Train at each drop rate (applied to both edges and features of both
    views) over cfg.seeds; returns one mean/std summary row per rate."""
    rows = []
    for rate in rates:
        sub = dataclasses.replace(cfg, p_edge_1=rate, p_edge_2=rate, p_feat_1=rate, p_feat_2=rate)
        run_dir = os.path.join(out_dir, f"rate_{rate:g}") if out_dir else None
        results = train_many(sub, run_dir, workers=workers)
        finals = [r.records[-1] for r in results if r.records]
        accs = [r.probe_test_acc for r in results]
        rows.append(
            {
                "rate": rate,
                "mean_pcd": float(np.mean([f.pcd for f in finals])) if finals else float("nan"),
                "std_pcd": float(np.std([f.pcd for f in finals])) if finals else float("nan"),
                "mean_ncd": float(np.mean([f.ncd for f in finals])) if finals else float("nan"),
                "std_ncd": float(np.std([f.ncd for f in finals])) if finals else float("nan"),
                "mean_acc": float(np.mean(accs)),
                "std_acc": float(np.std(accs)),
                "seeds": list(cfg.seeds),
            }
        )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_sweep_csv(os.path.join(out_dir, "sweep_droprate.csv"), rows, key="rate")
    return rows


def sweep_depth(cfg: RunConfig, layer_counts: list[int], out_dir: str | None = None, workers: int = 1) -> list[dict]:
    """Accuracy table grace vs grace_s across encoder depths."""
    rows = []
    for layers in layer_counts:
        for method in ("grace", "grace_s"):
            sub = dataclasses.replace(cfg, layers=layers, method=method)
            run_dir = os.path.join(out_dir, f"depth_{layers}_{method}") if out_dir else None
            results = train_many(sub, run_dir, workers=workers)
            accs = [r.probe_test_acc for r in results]
            rows.append(
                {
                    "layers": layers,
                    "method": method,
                    "mean_acc": float(np.mean(accs)),
                    "std_acc": float(np.std(accs)),
                    "seeds": list(cfg.seeds),
                }
            )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_sweep_csv(os.path.join(out_dir, "sweep_depth.csv"), rows, key="layers")
    return rows


def _write_sweep_csv(path: str, rows: list[dict], key: str) -> None:
    if not rows:
        return
    cols = [c for c in rows[0] if c != "seeds"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def report(out_dir: str) -> dict:
    """Aggregate metrics CSVs under ``out_dir`` into mean/std accuracy per
    method plus bound-check pass counts; missing pieces become warnings."""
    summary: dict = {"methods": {}, "bound_checks": {}, "warnings": []}
    by_method: dict[str, list[tuple[int, float]]] = {}
    margins = []
    margin_pass = 0
    rows_seen = 0
    files = sorted(
        f for f in (os.listdir(out_dir) if os.path.isdir(out_dir) else [])
        if f.startswith("metrics_") and f.endswith(".csv")
    )
    if not files:
        summary["warnings"].append(f"no metrics CSVs found in {out_dir}")
    for fname in files:
        stem = fname[len("metrics_"):-len(".csv")]
        method, _, seed_s = stem.rpartition("_")
        try:
            rows = read_metrics_csv(os.path.join(out_dir, fname))
        except ValueError as exc:
            summary["warnings"].append(str(exc))
            continue
        if not rows:
            summary["warnings"].append(f"{fname}: no logged epochs")
            continue
        for row in rows:
            rows_seen += 1
            margin = float(row["bound_margin"])
            slack = float(row["bound_m"]) ** -0.5
            margins.append(margin)
            if margin + slack >= 0.0:
                margin_pass += 1
        final = rows[-1]
        if final["probe_acc"] == "":
            summary["warnings"].append(f"{fname}: run has no final probe accuracy (partial run?)")
            continue
        by_method.setdefault(method, []).append((int(seed_s), float(final["probe_acc"])))
    for method, pairs in sorted(by_method.items()):
        accs = [a for _, a in sorted(pairs)]
        summary["methods"][method] = {
            "seeds": [s for s, _ in sorted(pairs)],
            "mean_acc": float(np.mean(accs)),
            "std_acc": float(np.std(accs)),
            "runs": len(accs),
        }
    summary["bound_checks"] = {
        "rows": rows_seen,
        "margin_plus_slack_nonneg": margin_pass,
        "min_margin": float(min(margins)) if margins else None,
        "raw_margins": margins,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
