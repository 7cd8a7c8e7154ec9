"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue
from .graph import Graph


def check_graph(g) -> Graph:
    if not isinstance(g, Graph):
        raise TypeError(f"expected a Graph, got {type(g).__name__}")
    return g


def check_labels(y, n_vertices: int, n_classes: int) -> np.ndarray:
    """Coerce to an int vector of length n_vertices with values in
    {-1, 0, ..., n_classes - 1}."""
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_vertices:
        raise DimensionMismatch(f"labels must be a vector of length {n_vertices}")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.asarray(y, dtype=np.float64)
        if not np.all(np.isfinite(rounded)):
            raise NonFiniteValue("labels contain NaN or Inf")
        if np.any(rounded != np.round(rounded)):
            raise ValueError("labels must be integers")
        y = rounded.astype(np.int64)
    y = y.astype(np.int64)
    if y.size and (y.min() < -1 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in -1..{n_classes - 1}")
    return y


def check_mask(mask, n_vertices: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.shape != (n_vertices,):
        raise DimensionMismatch(f"mask must be a boolean vector of length {n_vertices}")
    return mask
