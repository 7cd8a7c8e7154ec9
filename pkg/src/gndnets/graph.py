"""Sparse graph storage and the propagation kernels used everywhere else.

Matrices are CSR (compressed sparse row): ``row_ptr`` has ``n_rows + 1``
non-decreasing entries, ``col_idx`` holds strictly increasing column indices
within each row, and ``values`` holds the corresponding nonzeros. Explicit
zeros are never stored. Dense matrices are plain 2-D float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroDegreeRow


class SparseMatrix:
    """Validated CSR matrix with float64 values.

    Instances are treated as immutable: no method mutates the buffers, and
    the transpose is cached after the first request.
    """

    __slots__ = ("n_rows", "n_cols", "row_ptr", "col_idx", "values", "_transpose")

    def __init__(self, n_rows, n_cols, row_ptr, col_idx, values, _checked=False):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_ptr = np.ascontiguousarray(row_ptr, dtype=np.int64)
        self.col_idx = np.ascontiguousarray(col_idx, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._transpose = None
        if not _checked:
            self._validate()

    def _validate(self):
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("negative matrix dimensions")
        rp = self.row_ptr
        if rp.shape != (self.n_rows + 1,):
            raise ValueError("row_ptr must have n_rows + 1 entries")
        if rp[0] != 0 or rp[-1] != self.col_idx.shape[0]:
            raise ValueError("row_ptr must start at 0 and end at nnz")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if self.col_idx.shape != self.values.shape:
            raise ValueError("col_idx and values must have equal length")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing within each row: the only non-increasing
            # steps of col_idx may occur at row boundaries
            nondecreasing = np.flatnonzero(np.diff(self.col_idx) <= 0) + 1
            if not np.all(np.isin(nondecreasing, rp)):
                raise ValueError("column indices must be strictly increasing per row")
        if np.any(self.values == 0.0):
            raise ValueError("explicit zeros may not be stored")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("matrix values must be finite")

    @property
    def nnz(self):
        return int(self.values.shape[0])

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def row_counts(self):
        """Number of stored entries in each row."""
        return np.diff(self.row_ptr)

    def row_of_entry(self):
        """Row index of every stored entry, in storage order."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.row_counts())

    def row_sums(self):
        out = np.zeros(self.n_rows)
        np.add.at(out, self.row_of_entry(), self.values)
        return out

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, values):
        """Build from coordinate triplets; duplicates are rejected."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        keep = values != 0.0
        rows, cols, values = rows[keep], cols[keep], values[keep]
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size and np.any((np.diff(rows) == 0) & (np.diff(cols) == 0)):
            raise ValueError("duplicate coordinates")
        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n_rows, n_cols, row_ptr, cols, values)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols))
        out[self.row_of_entry(), self.col_idx] = self.values
        return out

    def transpose(self):
        if self._transpose is None:
            t = SparseMatrix.from_coo(
                self.n_cols, self.n_rows, self.col_idx, self.row_of_entry(), self.values
            )
            self._transpose = t
        return self._transpose

    def scale_rows(self, factors):
        """New matrix whose row i is factors[i] times row i of self."""
        factors = np.asarray(factors, dtype=np.float64)
        if factors.shape != (self.n_rows,):
            raise DimensionMismatch("one factor per row required")
        return SparseMatrix(
            self.n_rows,
            self.n_cols,
            self.row_ptr,
            self.col_idx,
            self.values * factors[self.row_of_entry()],
            _checked=True,
        )


class Graph:
    """Undirected graph with per-vertex features and (partial) labels.

    The adjacency is symmetric with an empty diagonal; ``labels`` uses class
    ids 0..n_classes-1 and -1 for unlabeled vertices.
    """

    def __init__(self, adjacency: SparseMatrix, features, labels, n_classes):
        if adjacency.n_rows != adjacency.n_cols:
            raise DimensionMismatch("adjacency must be square")
        n = adjacency.n_rows
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != n:
            raise DimensionMismatch("features must have one row per vertex")
        if labels.shape != (n,):
            raise DimensionMismatch("labels must have one entry per vertex")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if n_classes < 1:
            raise ValueError("n_classes must be at least 1")
        if labels.size and (labels.min() < -1 or labels.max() >= n_classes):
            raise ValueError("labels must lie in {-1, 0, ..., n_classes - 1}")
        rows = adjacency.row_of_entry()
        if np.any(rows == adjacency.col_idx):
            raise ValueError("adjacency diagonal must be empty")
        t = adjacency.transpose()
        if not (
            np.array_equal(t.row_ptr, adjacency.row_ptr)
            and np.array_equal(t.col_idx, adjacency.col_idx)
            and np.array_equal(t.values, adjacency.values)
        ):
            raise ValueError("adjacency must be symmetric")
        self.adjacency = adjacency
        self.features = features
        self.labels = labels
        self.n_classes = int(n_classes)
        self.n_vertices = n

    @property
    def n_features(self):
        return self.features.shape[1]

    @classmethod
    def from_edges(cls, n_vertices, edges, features, labels, n_classes):
        """Build a graph from an iterable of (u, v) pairs.

        Edges are symmetrized, duplicates collapse to a single unweighted
        edge, and self-edges are dropped.
        """
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n_vertices):
            raise ValueError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        keys = np.unique(both[:, 0] * np.int64(n_vertices) + both[:, 1])
        rows, cols = keys // n_vertices, keys % n_vertices
        adj = SparseMatrix.from_coo(n_vertices, n_vertices, rows, cols, np.ones(keys.size))
        return cls(adj, features, labels, n_classes)


@dataclass
class HopSequence:
    """The matrices Z, WZ, W^2 Z, ..., W^(K-1) Z in order."""

    hops: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.hops)


def add_self_loops(g: Graph) -> SparseMatrix:
    """Adjacency plus the identity (one unit self-loop per vertex)."""
    a = g.adjacency
    n = a.n_rows
    rows = np.concatenate([a.row_of_entry(), np.arange(n, dtype=np.int64)])
    cols = np.concatenate([a.col_idx, np.arange(n, dtype=np.int64)])
    vals = np.concatenate([a.values, np.ones(n)])
    return SparseMatrix.from_coo(n, n, rows, cols, vals)


def transition_matrix(a_tilde: SparseMatrix) -> SparseMatrix:
    """Row-stochastic random-walk matrix: each row divided by its sum."""
    deg = a_tilde.row_sums()
    zero = np.flatnonzero(deg == 0.0)
    if zero.size:
        raise ZeroDegreeRow(f"row {zero[0]} has zero degree; add self-loops first")
    return a_tilde.scale_rows(1.0 / deg)


def renormalized_smoothing(a_tilde: SparseMatrix) -> SparseMatrix:
    """Symmetric normalization: D^(-1/2) A~ D^(-1/2)."""
    deg = a_tilde.row_sums()
    zero = np.flatnonzero(deg == 0.0)
    if zero.size:
        raise ZeroDegreeRow(f"row {zero[0]} has zero degree; add self-loops first")
    inv_sqrt = 1.0 / np.sqrt(deg)
    vals = a_tilde.values * inv_sqrt[a_tilde.row_of_entry()] * inv_sqrt[a_tilde.col_idx]
    return SparseMatrix(
        a_tilde.n_rows, a_tilde.n_cols, a_tilde.row_ptr, a_tilde.col_idx, vals, _checked=True
    )


def spmm(m: SparseMatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse times dense product, accumulated sequentially within each row."""
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2 or m.n_cols != dense.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply {m.n_rows}x{m.n_cols} sparse by dense of shape {dense.shape}"
        )
    out = np.zeros((m.n_rows, dense.shape[1]))
    if m.nnz == 0:
        return out
    prod = m.values[:, None] * dense[m.col_idx]
    nonempty = np.flatnonzero(np.diff(m.row_ptr) > 0)
    # reduceat over the starts of non-empty rows: each segment runs to the
    # next listed start, which is exactly the end of that row's entries
    out[nonempty] = np.add.reduceat(prod, m.row_ptr[nonempty], axis=0)
    return out


def hop_sequence(w: SparseMatrix, z: np.ndarray, k: int) -> HopSequence:
    """[Z, WZ, ..., W^(k-1) Z] by repeated spmm; powers of W are never formed."""
    if k < 1:
        raise ValueError("hop count must be at least 1")
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or w.n_cols != z.shape[0]:
        raise DimensionMismatch(f"hop sequence needs {w.n_cols} rows, got {z.shape}")
    hops = [z]
    for _ in range(k - 1):
        hops.append(spmm(w, hops[-1]))
    return HopSequence(hops)


def check_nonbipartite_connected(g: Graph) -> tuple[bool, bool]:
    """(connected, bipartite) of the raw adjacency, by BFS 2-coloring."""
    n = g.n_vertices
    a = g.adjacency
    color = np.full(n, -1, dtype=np.int64)
    components = 0
    bipartite = True
    for seed in range(n):
        if color[seed] >= 0:
            continue
        components += 1
        color[seed] = 0
        frontier = [seed]
        while frontier:
            nxt = []
            for u in frontier:
                for v in a.col_idx[a.row_ptr[u] : a.row_ptr[u + 1]]:
                    if color[v] < 0:
                        color[v] = color[u] ^ 1
                        nxt.append(int(v))
                    elif color[v] == color[u]:
                        bipartite = False
            frontier = nxt
    return components == 1, bipartite
