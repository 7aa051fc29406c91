"""Graph container, text-format dataset IO, synthetic SBM graphs,
symmetric normalization, and train/test splits.

Dataset directory format (plain text, hand-inspectable):

* ``edges.tsv``     one undirected edge per line, two 0-indexed integer
                    endpoints separated by whitespace; self-loops and
                    duplicate lines are rejected with their row numbers.
* ``features.csv``  N rows of F comma-separated reals.
* ``labels.txt``    N integer class ids, contiguous from 0.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng


class DatasetError(ValueError):
    pass


@dataclass
class Graph:
    """Undirected graph with node features and integer labels.

    The adjacency is a dense symmetric nonnegative float64 matrix with a
    zero diagonal; unweighted edges carry weight 1.0.  Immutable by
    convention: operations build new arrays instead of mutating these.
    """

    n: int
    adjacency: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.adjacency = np.ascontiguousarray(self.adjacency, dtype=np.float64)
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.adjacency.shape != (self.n, self.n):
            raise DatasetError(f"adjacency shape {self.adjacency.shape} != ({self.n}, {self.n})")
        if self.features.shape[0] != self.n or self.labels.shape != (self.n,):
            raise DatasetError("features/labels row count does not match node count")
        if np.abs(self.adjacency - self.adjacency.T).max(initial=0.0) != 0.0:
            raise DatasetError("adjacency is not symmetric")
        if self.n and np.abs(np.diag(self.adjacency)).max(initial=0.0) != 0.0:
            raise DatasetError("adjacency has nonzero diagonal entries")
        if self.adjacency.min(initial=0.0) < 0.0:
            raise DatasetError("adjacency has negative weights")
        present = np.unique(self.labels)
        expected = np.arange(self.num_classes)
        if not np.array_equal(present, expected):
            raise DatasetError(
                f"labels must cover 0..{self.num_classes - 1} exactly, got {present.tolist()}"
            )

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (E, 2) int array with i < j, sorted."""
        return edge_list_of(self.adjacency)


def edge_list_of(adjacency: np.ndarray) -> np.ndarray:
    i, j = np.nonzero(np.triu(adjacency, k=1))
    return np.stack([i, j], axis=1).astype(np.int64)


@dataclass
class Split:
    train_ids: np.ndarray
    test_ids: np.ndarray
    seed: int
    warning: str | None = None


def load_dataset(directory: str | os.PathLike) -> Graph:
    directory = os.fspath(directory)
    paths = {name: os.path.join(directory, name) for name in ("edges.tsv", "features.csv", "labels.txt")}
    for name, path in paths.items():
        if not os.path.isfile(path):
            raise DatasetError(f"missing dataset file: {path}")

    features = _read_features(paths["features.csv"])
    n = features.shape[0]

    labels = _read_labels(paths["labels.txt"], n)
    k = int(labels.max()) + 1 if n else 0
    present = np.unique(labels)
    if not np.array_equal(present, np.arange(k)):
        raise DatasetError(f"label set not contiguous from 0: {present.tolist()}")

    adjacency = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    with open(paths["edges.tsv"]) as fh:
        for row, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DatasetError(f"edges.tsv row {row}: expected two endpoints, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"edges.tsv row {row}: non-integer endpoint in {line!r}") from None
            if a == b:
                raise DatasetError(f"edges.tsv row {row}: self-loop {a}-{b} rejected")
            if not (0 <= a < n and 0 <= b < n):
                raise DatasetError(f"edges.tsv row {row}: endpoint out of range for {n} nodes")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise DatasetError(f"edges.tsv row {row}: duplicate edge {key[0]}-{key[1]} rejected")
            seen.add(key)
            adjacency[a, b] = 1.0
            adjacency[b, a] = 1.0

    return Graph(n=n, adjacency=adjacency, features=features, labels=labels, num_classes=k)


def _read_features(path: str) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for row, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DatasetError(f"features.csv row {row}: ragged row ({len(vals)} != {width} columns)")
            try:
                rows.append([float(v) for v in vals])
            except ValueError:
                raise DatasetError(f"features.csv row {row}: non-numeric value") from None
    if not rows:
        raise DatasetError("features.csv is empty")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: str, n: int) -> np.ndarray:
    with open(path) as fh:
        vals = [line.strip() for line in fh if line.strip()]
    if len(vals) != n:
        raise DatasetError(f"labels.txt has {len(vals)} labels for {n} nodes")
    try:
        return np.array([int(v) for v in vals], dtype=np.int64)
    except ValueError:
        raise DatasetError("labels.txt: non-integer label") from None


def save_dataset(g: Graph, directory: str | os.PathLike) -> None:
    """Write a graph back to the text format (unweighted graphs only).

    Uses %.17g for features so load(save(g)) round-trips bit-exactly.
    """
    directory = os.fspath(directory)
    weights = g.adjacency[g.adjacency != 0.0]
    if weights.size and not np.all(weights == 1.0):
        raise DatasetError("save_dataset supports unweighted graphs only")
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "edges.tsv"), "w") as fh:
        for a, b in g.edge_list():
            fh.write(f"{a}\t{b}\n")
    with open(os.path.join(directory, "features.csv"), "w") as fh:
        for row in g.features:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    with open(os.path.join(directory, "labels.txt"), "w") as fh:
        for y in g.labels:
            fh.write(f"{int(y)}\n")


def sbm_generate(
    block_sizes: list[int],
    p_in: float,
    p_out: float,
    feat_dim: int,
    feat_shift: float,
    seed: int,
) -> Graph:
    """Stochastic block model with Gaussian features shifted per block.

    Each intra-block pair gets an edge w.p. ``p_in``, inter-block w.p.
    ``p_out``.  Features are standard normal noise plus a per-block mean
    direction of magnitude ``feat_shift``.  Fully determined by ``seed``.
    """
    if not block_sizes:
        raise ValueError("block_sizes must be nonempty")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must be in [0, 1]")
    sizes = [int(s) for s in block_sizes]
    if any(s <= 0 for s in sizes):
        raise ValueError("block sizes must be positive")
    n = sum(sizes)
    k = len(sizes)
    labels = np.repeat(np.arange(k), sizes)

    rng = Rng(seed)
    same = labels[:, None] == labels[None, :]
    pmat = np.where(same, p_in, p_out)
    upper = np.triu(rng.uniform((n, n)) < pmat, k=1)
    adjacency = (upper | upper.T).astype(np.float64)

    means = rng.gaussian((k, feat_dim))
    norms = np.sqrt((means * means).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    means = means / norms * feat_shift
    features = rng.gaussian((n, feat_dim)) + means[labels]

    return Graph(n=n, adjacency=adjacency, features=features, labels=labels, num_classes=k)


def sym_normalize(a: np.ndarray, add_self_loops: bool = True) -> np.ndarray:
    """D^{-1/2} (A [+ I]) D^{-1/2} with degrees from the (self-looped) matrix.

    Degrees use absolute values so weighted matrices that picked up small
    negative entries after spectral editing still normalize sensibly; for
    nonnegative input this is the plain GCN normalization.  Zero-degree
    rows come out all zero (or a lone diagonal 1 when self-loops are on).
    """
    a = np.asarray(a, dtype=np.float64)
    m = a + np.eye(a.shape[0]) if add_self_loops else a
    deg = np.abs(m).sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0.0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return m * inv_sqrt[:, None] * inv_sqrt[None, :]


def make_split(g: Graph, train_frac: float, seed: int) -> Split:
    """Uniform split with floor(train_frac * N) training nodes."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    n_train = int(np.floor(train_frac * g.n))
    perm = Rng(seed).permutation(g.n)
    train_ids = np.sort(perm[:n_train])
    test_ids = np.sort(perm[n_train:])
    warning = None
    if n_train == 0:
        warning = "train split is empty"
    else:
        missing = sorted(set(range(g.num_classes)) - set(g.labels[train_ids].tolist()))
        if missing:
            warning = f"train split is missing classes {missing}"
    return Split(train_ids=train_ids, test_ids=test_ids, seed=seed, warning=warning)


def edit_count(g: Graph | np.ndarray, plan) -> tuple[int, int]:
    """(undirected edges removed, feature dimensions masked) for a view plan."""
    edges_removed = int((~plan.edge_keep).sum())
    features_masked = int((~plan.feat_keep).sum())
    return edges_removed, features_masked
