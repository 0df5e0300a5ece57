"""Staggered node lattices, PML depth tags and exact nearest-neighbour search.

Electric nodes sit on the closed rectangular domain, ``x_i = i * d``.  Magnetic
nodes are the dual lattice shifted by ``d / 2`` along every axis, so they lie
strictly inside the outermost electric ring and every interior electric node is
surrounded by magnetic nodes (and vice versa).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

# distances closer than this (relative to d_min) count as ties
_TIE_DIGITS = 9


@dataclass(frozen=True, eq=False)
class NodeLattice:
    """A set of field nodes of one kind ("E" or "H").

    Attributes
    ----------
    positions : (n, dim) array, metres
    kind : "E" or "H"
    spacing : (dim,) array, lattice pitch per axis in metres
    extents : (dim,) array, domain size per axis in metres
    shape : nodes per axis; ``positions`` is the C-ordered flattening of it
    pml_depth : (n, dim) array, depth of each node inside the PML per axis
    pml_thickness : (dim,) array, PML thickness per axis
    """

    positions: np.ndarray
    kind: str
    spacing: np.ndarray
    extents: np.ndarray
    shape: tuple
    pml_depth: np.ndarray
    pml_thickness: np.ndarray
    pml_layers: int = 0

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def d_min(self) -> float:
        return float(np.min(self.spacing))

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of nodes with zero PML depth on every axis."""
        return np.all(self.pml_depth == 0.0, axis=1)

    def grid_view(self, values):
        """Reshape a per-node array to the lattice shape (axis 0 = x)."""
        return np.asarray(values).reshape(self.shape)

    def index_of(self, multi_index) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def nearest_node(self, point) -> int:
        return int(nearest_neighbors(self, point, 1)[0])

    @cached_property
    def _index(self) -> "BinnedIndex":
        return BinnedIndex(self.positions, self.d_min)


def _pml_depth(coords, extent, layers, spacing):
    if layers == 0:
        return np.zeros_like(coords)
    thickness = layers * spacing
    low = np.clip(thickness - coords, 0.0, thickness)
    high = np.clip(coords - (extent - thickness), 0.0, thickness)
    depth = np.maximum(low, high)
    # snap rounding noise at the interface to an exact zero
    depth[depth < 1e-9 * spacing] = 0.0
    return depth


def _make_lattice(axes, kind, spacing, extents, pml_layers):
    mesh = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([m.ravel() for m in mesh], axis=1)
    depth = np.stack(
        [_pml_depth(positions[:, k], extents[k], pml_layers, spacing[k])
         for k in range(len(axes))],
        axis=1,
    )
    return NodeLattice(
        positions=positions,
        kind=kind,
        spacing=spacing,
        extents=extents,
        shape=tuple(len(a) for a in axes),
        pml_depth=depth,
        pml_thickness=pml_layers * spacing,
        pml_layers=pml_layers,
    )


def build_staggered_lattice(extents, nodes_per_axis, pml_layers=0, dim=None):
    """Build the electric and magnetic node lattices.

    Parameters
    ----------
    extents : float or sequence of float
        Domain size per axis in metres.
    nodes_per_axis : int or sequence of int
        Electric nodes per axis (the magnetic lattice has one fewer).
    pml_layers : int
        Number of lattice spacings occupied by the PML at every face.
    dim : int, optional
        Spatial dimension when both ``extents`` and ``nodes_per_axis`` are
        scalars (default 2).

    Returns
    -------
    (NodeLattice, NodeLattice)
        The E-lattice and the H-lattice.
    """
    if dim is None:
        if np.ndim(extents):
            dim = len(extents)
        elif np.ndim(nodes_per_axis):
            dim = len(nodes_per_axis)
        else:
            dim = 2
    extents = np.broadcast_to(np.asarray(extents, dtype=float), (dim,)).copy()
    counts = np.broadcast_to(np.asarray(nodes_per_axis, dtype=int), (dim,)).copy()
    if np.any(extents <= 0):
        raise ValueError(f"extents must be positive, got {extents.tolist()}")
    if np.any(counts < 2):
        raise ValueError(f"need at least 2 nodes per axis, got {counts.tolist()}")
    if pml_layers < 0:
        raise ValueError("pml_layers must be non-negative")
    if np.any(2 * pml_layers >= counts):
        raise ValueError(
            f"pml_layers={pml_layers} would consume the whole domain "
            f"({counts.tolist()} nodes per axis)"
        )
    spacing = extents / (counts - 1)
    e_axes = [np.arange(n) * h for n, h in zip(counts, spacing)]
    h_axes = [(np.arange(n - 1) + 0.5) * h for n, h in zip(counts, spacing)]
    e = _make_lattice(e_axes, "E", spacing, extents, pml_layers)
    h = _make_lattice(h_axes, "H", spacing, extents, pml_layers)
    return e, h


class BinnedIndex:
    """Exact k-nearest-neighbour queries over points binned into cubic cells.

    Cells have side ``cell``; a query scans rings of cells of growing Chebyshev
    radius until the k-th candidate distance is provably final.
    """

    def __init__(self, points, cell):
        self.points = np.asarray(points, dtype=float)
        if self.points.shape[0] == 0:
            raise ValueError("cannot index an empty lattice")
        self.cell = float(cell)
        self.origin = self.points.min(axis=0)
        keys = np.floor((self.points - self.origin) / self.cell + 1e-9).astype(np.int64)
        self.nbins = keys.max(axis=0) + 1
        flat = np.ravel_multi_index(keys.T, self.nbins)
        order = np.argsort(flat, kind="stable")
        self._order = order
        counts = np.bincount(flat, minlength=int(np.prod(self.nbins)))
        self._starts = np.concatenate([[0], np.cumsum(counts)])

    def _cell_members(self, lo, hi):
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, self.nbins - 1)
        if np.any(lo > hi):
            return np.empty(0, dtype=np.int64)
        ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
        chunks = []
        for cell in product(*ranges):
            f = np.ravel_multi_index(cell, self.nbins)
            s, e = self._starts[f], self._starts[f + 1]
            if e > s:
                chunks.append(self._order[s:e])
        if not chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(chunks)

    def query(self, point, count):
        point = np.asarray(point, dtype=float)
        n = self.points.shape[0]
        if count > n:
            raise ValueError(f"asked for {count} neighbours but lattice has {n} nodes")
        if count <= 0:
            return np.empty(0, dtype=np.int64)
        center = np.floor((point - self.origin) / self.cell + 1e-9).astype(np.int64)
        # distance from the query to the boundary of its own cell
        rel = (point - self.origin) / self.cell - center
        margin = float(np.min(np.minimum(rel, 1.0 - rel))) * self.cell
        # ring at which every bin has been scanned
        full = int(np.max(np.maximum(center, self.nbins - 1 - center)))
        ring = 0
        while True:
            cand = self._cell_members(center - ring, center + ring)
            if ring >= full:
                dist = np.linalg.norm(self.points[cand] - point, axis=1)
                break
            if cand.size >= count:
                dist = np.linalg.norm(self.points[cand] - point, axis=1)
                # unscanned points are at least this far away
                reach = ring * self.cell + max(margin, 0.0)
                kth = np.partition(dist, count - 1)[count - 1]
                if kth < reach * (1.0 - 1e-8):
                    break
            ring += 1
        key = np.round(dist / self.cell, _TIE_DIGITS)
        order = np.lexsort((cand, key))
        return cand[order[:count]].astype(np.int64)


def nearest_neighbors(lattice: NodeLattice, query_point, count: int) -> np.ndarray:
    """Indices of the ``count`` nodes closest to ``query_point``.

    Sorted by ascending distance; equal distances (to 1e-9 d_min) are ordered by
    ascending node index.
    """
    if lattice.size == 0:
        raise ValueError("empty lattice")
    return lattice._index.query(query_point, count)


def neighbor_table(lattice: NodeLattice, query_points, count: int) -> np.ndarray:
    """``nearest_neighbors`` for many query points, shape (m, count)."""
    query_points = np.atleast_2d(np.asarray(query_points, dtype=float))
    out = np.empty((query_points.shape[0], count), dtype=np.int64)
    for i, p in enumerate(query_points):
        out[i] = nearest_neighbors(lattice, p, count)
    return out
