"""Dataset generation, file loading, and embedding dumps.

On-disk dataset format (three plain-text files):

  edges     one "u v" pair per line, whitespace separated, 0-based vertex
            ids; '#' starts a comment; blank lines are ignored. Edges are
            symmetrized, duplicates collapse, self-edges are dropped.
  features  CSV, no header, row i = feature vector of vertex i.
  labels    one integer per line; -1 marks an unlabeled vertex. Distinct
            non-negative values are mapped to class ids 0..C-1 in sorted
            order.

The vertex count is the number of feature rows and must match the label
count; every edge endpoint must be a valid vertex id.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    InconsistentVertexCount,
    InvalidParameter,
    ParseError,
    UnknownLabel,
)
from .graph import Graph, HopSequence, SparseMatrix


@dataclass(frozen=True)
class SbmConfig:
    """Stochastic block model with noisy class-centroid features."""

    n_per_class: int
    n_classes: int
    p_in: float
    p_out: float
    feature_dim: int
    feature_noise: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_per_class < 1 or self.n_classes < 2:
            raise InvalidParameter("need at least 1 vertex per class and 2 classes")
        if not (0.0 <= self.p_out <= self.p_in <= 1.0):
            raise InvalidParameter("edge probabilities need 0 <= p_out <= p_in <= 1")
        if self.feature_dim < self.n_classes:
            raise InvalidParameter("feature_dim must be at least n_classes")
        if self.feature_noise < 0.0:
            raise InvalidParameter("feature_noise must be non-negative")
        return self


def generate_sbm(config: SbmConfig) -> Graph:
    """Sample a block-model graph; identical configs give identical graphs.

    Vertices are grouped by class. Each class centroid is a distinct unit
    basis vector, so class separability in feature space is controlled
    solely by feature_noise.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_per_class * config.n_classes
    labels = np.repeat(np.arange(config.n_classes, dtype=np.int64), config.n_per_class)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, config.p_in, config.p_out)
    draws = rng.random((n, n))
    upper = (draws < prob) & (np.arange(n)[:, None] < np.arange(n)[None, :])
    dense = upper | upper.T
    rows, cols = np.nonzero(dense)
    adjacency = SparseMatrix.from_coo(n, n, rows, cols, np.ones(rows.size))
    centroids = np.zeros((config.n_classes, config.feature_dim))
    centroids[np.arange(config.n_classes), np.arange(config.n_classes)] = 1.0
    features = centroids[labels] + config.feature_noise * rng.standard_normal(
        (n, config.feature_dim)
    )
    return Graph(adjacency, features, labels, config.n_classes)


@dataclass(frozen=True)
class DatasetFiles:
    edges: str
    features: str
    labels: str


def _parse_features(path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            try:
                row = np.array(fields, dtype=np.float64)
            except ValueError:
                raise ParseError(path, line_no, "malformed feature value") from None
            if width is None:
                width = row.size
            elif row.size != width:
                raise ParseError(path, line_no, f"expected {width} columns, got {row.size}")
            rows.append(row)
    if not rows:
        raise ParseError(path, 1, "feature file is empty")
    return np.vstack(rows)


def _parse_labels(path) -> np.ndarray:
    raw = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                value = int(line)
            except ValueError:
                raise ParseError(path, line_no, f"malformed label {line!r}") from None
            if value < -1:
                raise UnknownLabel(f"{path}:{line_no}: label {value} is below -1")
            raw.append(value)
    return np.array(raw, dtype=np.int64)


def _parse_edges(path) -> np.ndarray:
    pairs = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ParseError(path, line_no, f"expected two vertex ids, got {len(fields)}")
            try:
                pairs.append((int(fields[0]), int(fields[1])))
            except ValueError:
                raise ParseError(path, line_no, "malformed vertex id") from None
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def load_dataset(files: DatasetFiles) -> Graph:
    """Parse the three files into a validated Graph."""
    features = _parse_features(files.features)
    raw_labels = _parse_labels(files.labels)
    edges = _parse_edges(files.edges)
    n = features.shape[0]
    if raw_labels.shape[0] != n:
        raise InconsistentVertexCount(
            f"{n} feature rows but {raw_labels.shape[0]} labels"
        )
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = edges.min() if edges.min() < 0 else edges.max()
        raise InconsistentVertexCount(f"edge endpoint {bad} outside 0..{n - 1}")
    distinct = np.unique(raw_labels[raw_labels >= 0])
    mapping = {int(v): i for i, v in enumerate(distinct)}
    labels = np.array([mapping.get(int(v), -1) for v in raw_labels], dtype=np.int64)
    n_classes = max(len(distinct), 1)
    return Graph.from_edges(n, edges, features, labels, n_classes)


def save_dataset(g: Graph, files: DatasetFiles):
    """Write a graph in the on-disk format; load_dataset restores it."""
    with open(files.edges, "w") as fh:
        rows = g.adjacency.row_of_entry()
        for u, v in zip(rows, g.adjacency.col_idx):
            if u < v:  # one line per undirected edge
                fh.write(f"{u}\t{v}\n")
    with open(files.features, "w") as fh:
        for row in g.features:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    with open(files.labels, "w") as fh:
        for value in g.labels:
            fh.write(f"{value}\n")


def dump_embeddings(hops: HopSequence, out_dir) -> list[str]:
    """One CSV per hop: a "k=<k>" header line then one row per vertex with
    17 significant digits, enough to restore each double exactly."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k, mat in enumerate(hops.hops):
        path = os.path.join(out_dir, f"hop_{k:02d}.csv")
        with open(path, "w") as fh:
            fh.write(f"k={k}\n")
            for row in mat:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
        paths.append(path)
    return paths


def read_embedding(path) -> tuple[int, np.ndarray]:
    """Inverse of one dump_embeddings file: (k, matrix)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("k="):
            raise ParseError(path, 1, "missing k=<k> header")
        k = int(header[2:])
        rows = [np.array(line.strip().split(","), dtype=np.float64)
                for line in fh if line.strip()]
    return k, np.vstack(rows)
