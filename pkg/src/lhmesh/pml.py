"""Graded Berenger PML conductivities.

Electric conductivity along axis k grows polynomially with the depth of a node
inside the layer; the magnetic one follows from the matching condition
``sigma_m / mu = sigma_e / eps``.  A node inside a face region is graded on one
axis only, edge regions on two, corner regions on three.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS0, ETA0, MU0
from .lattice import NodeLattice


@dataclass(frozen=True)
class PmlSpec:
    order: int = 2
    r_th: float = 1e-3
    thickness: float | tuple = 0.0015
    eta: float = ETA0

    def __post_init__(self):
        if not 0 < self.r_th < 1:
            raise ValueError(f"reflection coefficient must lie in (0, 1), got {self.r_th}")
        if self.order < 0:
            raise ValueError("grading order must be non-negative")
        if np.any(np.asarray(self.thickness) <= 0):
            raise ValueError("PML thickness must be positive")

    def thickness_along(self, axis: int) -> float:
        t = np.asarray(self.thickness, dtype=float)
        return float(t) if t.ndim == 0 else float(t[axis])


def sigma_max(spec: PmlSpec, axis: int = 0) -> float:
    """Peak electric conductivity in S/m for the requested reflection level."""
    d = spec.thickness_along(axis)
    return -(spec.order + 1) * np.log(spec.r_th) / (2.0 * spec.eta * d)


def graded_sigma(spec: PmlSpec, depth, axis: int = 0):
    d = spec.thickness_along(axis)
    depth = np.asarray(depth, dtype=float)
    if np.any(depth < 0) or np.any(depth > d * (1 + 1e-9)):
        raise ValueError(f"depth must lie in [0, {d}]")
    return sigma_max(spec, axis) * np.minimum(depth / d, 1.0) ** spec.order


@dataclass(frozen=True)
class ConductivityField:
    """Per-node conductivities, columns are the x, y, z axes."""

    sigma_e: np.ndarray   # (n, 3) S/m
    sigma_m: np.ndarray   # (n, 3) ohm/m


def assign_conductivities(lattice: NodeLattice, spec: PmlSpec | None,
                          interior=(0.0, 0.0, 0.0), eps=EPS0, mu=MU0) -> ConductivityField:
    """Conductivities of every node of ``lattice``.

    Axes along which a node has zero PML depth keep the ``interior`` value.
    """
    n = lattice.size
    sigma_e = np.tile(np.asarray(interior, dtype=float), (n, 1))
    if spec is not None:
        for k in range(lattice.dim):
            depth = lattice.pml_depth[:, k]
            inside = depth > 0
            if np.any(inside):
                sigma_e[inside, k] = graded_sigma(spec, depth[inside], axis=k)
    sigma_m = sigma_e * (mu / eps)
    return ConductivityField(sigma_e, sigma_m)
