"""Phase-space mesh: a spectral (energy) axis times 1 or 2 spatial axes."""

from dataclasses import dataclass, field

import numpy as np


def uniform_edges(lo, hi, n):
    if n < 1 or hi <= lo:
        raise ValueError("need hi > lo and at least one element")
    return np.linspace(lo, hi, n + 1)


def geometric_edges(lo, hi, n, ratio):
    """Element edges with widths growing by ``ratio`` per element."""
    if n < 1 or hi <= lo:
        raise ValueError("need hi > lo and at least one element")
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if abs(ratio - 1.0) < 1e-14:
        return uniform_edges(lo, hi, n)
    first = (hi - lo) * (ratio - 1.0) / (ratio**n - 1.0)
    widths = first * ratio ** np.arange(n)
    edges = lo + np.concatenate([[0.0], np.cumsum(widths)])
    edges[-1] = hi  # kill accumulation round-off at the outer edge
    return edges


@dataclass
class Grid:
    """Tensor-product phase-space grid.

    ``energy_edges`` bounds the spectral elements; ``x_edges`` (and
    ``y_edges`` when two-dimensional) bound the spatial elements.
    """

    energy_edges: np.ndarray
    x_edges: np.ndarray
    y_edges: np.ndarray = None

    def __post_init__(self):
        self.energy_edges = np.asarray(self.energy_edges, dtype=float)
        self.x_edges = np.asarray(self.x_edges, dtype=float)
        if self.y_edges is not None:
            self.y_edges = np.asarray(self.y_edges, dtype=float)

    @property
    def dim(self):
        return 1 if self.y_edges is None else 2

    @property
    def n_energy(self):
        return self.energy_edges.size - 1

    @property
    def n_x(self):
        return self.x_edges.size - 1

    @property
    def n_y(self):
        return 0 if self.y_edges is None else self.y_edges.size - 1

    @property
    def spatial_edges(self):
        return [self.x_edges] if self.dim == 1 else [self.x_edges, self.y_edges]

    def widths(self, axis):
        return np.diff(self.spatial_edges[axis])

    def centers(self, axis):
        e = self.spatial_edges[axis]
        return 0.5 * (e[:-1] + e[1:])

    def spatial_nodes(self, axis, ref_nodes):
        """Physical node coordinates, shape (n_elems, n_nodes)."""
        e = self.spatial_edges[axis]
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * np.diff(e)
        return mid[:, None] + half[:, None] * np.asarray(ref_nodes)[None, :]
