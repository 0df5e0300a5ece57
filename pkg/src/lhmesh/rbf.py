"""Gaussian radial-basis shape functions and their first derivatives.

For a stencil of N nodes ``x_j`` and an evaluation point ``x``::

    A_ij = exp(-alpha |x_i - x_j|^2)        (moment matrix)
    B_j(x) = exp(-alpha |x - x_j|^2)
    Phi(x) = B(x) A^-1,   dPhi/dk(x) = dB/dk(x) A^-1

``A`` is symmetric, so all rows are obtained from one LU factorisation with
partial pivoting per stencil (``Phi^T = A^-1 B^T``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .lattice import NodeLattice, neighbor_table

MAX_CONDITION = 1e12


class IllConditionedStencil(ValueError):
    """Moment matrix too close to singular for a reliable solve."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(int(n) for n in nodes)


@dataclass(frozen=True)
class RbfKernel:
    """Gaussian kernel ``exp(-alpha r^2)`` with ``alpha = alpha_c / d_min^2``."""

    alpha_c: float
    d_min: float

    def __post_init__(self):
        if not self.alpha_c > 0:
            raise ValueError(f"alpha_c must be positive, got {self.alpha_c}")
        if not self.d_min > 0:
            raise ValueError(f"d_min must be positive, got {self.d_min}")

    @property
    def alpha(self) -> float:
        return self.alpha_c / self.d_min**2


def gaussian(r, kernel: RbfKernel):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be non-negative")
    return np.exp(-kernel.alpha * r**2)


@dataclass(frozen=True)
class Stencil:
    """Shape functions of one evaluation point.

    ``phi`` has shape (N,), ``dphi`` has shape (dim, N) in 1/m.
    """

    center: np.ndarray
    indices: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    condition: float


@dataclass(frozen=True)
class StencilSet:
    """Shape functions for many evaluation points over one source lattice."""

    indices: np.ndarray      # (m, N) source-node ids
    phi: np.ndarray          # (m, N)
    dphi: np.ndarray         # (m, dim, N)
    condition: np.ndarray    # (m,)
    n_source: int

    def __len__(self):
        return self.indices.shape[0]

    def stencil(self, i, centers) -> Stencil:
        return Stencil(np.asarray(centers[i]), self.indices[i], self.phi[i],
                       self.dphi[i], float(self.condition[i]))

    def _matrix(self, weights):
        m, n = self.indices.shape
        rows = np.repeat(np.arange(m), n)
        mat = sp.csr_matrix(
            (weights.ravel(), (rows, self.indices.ravel())), shape=(m, self.n_source)
        )
        mat.sort_indices()
        return mat

    def interpolation_matrix(self) -> sp.csr_matrix:
        return self._matrix(self.phi)

    def derivative_matrix(self, axis: int) -> sp.csr_matrix:
        """Sparse operator mapping source-node values to d/d(axis) at the centers."""
        return self._matrix(self.dphi[:, axis, :])


def _solve_batch(rel, kernel, max_condition):
    """rel: (m, N, dim) node offsets from their evaluation point."""
    alpha = kernel.alpha
    diff = rel[:, :, None, :] - rel[:, None, :, :]
    a = np.exp(-alpha * np.einsum("mijk,mijk->mij", diff, diff))
    b = np.exp(-alpha * np.einsum("mjk,mjk->mj", rel, rel))
    # d/dx_k exp(-alpha |x - x_j|^2) at x = 0 with rel = x_j - x
    db = 2.0 * alpha * rel * b[:, :, None]
    rhs = np.concatenate([b[:, :, None], db], axis=2)
    cond = np.linalg.cond(a)
    bad = ~(cond <= max_condition)
    if np.any(bad):
        return None, None, cond, bad
    sol = np.linalg.solve(a, rhs)
    phi = sol[:, :, 0]
    dphi = np.transpose(sol[:, :, 1:], (0, 2, 1))
    return phi, dphi, cond, bad


def _ill_conditioned(cond, bad, nodes):
    worst = float(np.max(np.where(np.isfinite(cond), cond, np.inf)[bad]))
    return IllConditionedStencil(
        f"moment matrix ill-conditioned (condition {worst:.3g} > {MAX_CONDITION:.0e}) "
        f"at {int(np.count_nonzero(bad))} stencil(s), first node id {int(nodes[0])}; "
        "use a larger alpha_c or a smaller stencil",
        nodes,
    )


def build_shape_functions(nodes, eval_point, kernel: RbfKernel,
                          max_condition: float = MAX_CONDITION) -> Stencil:
    """Shape-function values and gradients of a single stencil at ``eval_point``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    eval_point = np.asarray(eval_point, dtype=float).reshape(-1)
    if nodes.shape[0] < 1:
        raise ValueError("stencil needs at least one node")
    if nodes.shape[1] != eval_point.size:
        raise ValueError("node and evaluation point dimensions differ")
    gaps = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    if np.any(gaps == 0.0):
        raise ValueError("stencil nodes must be pairwise distinct")
    rel = (nodes - eval_point)[None]
    phi, dphi, cond, bad = _solve_batch(rel, kernel, max_condition)
    if bad[0]:
        raise _ill_conditioned(cond, bad, [0])
    return Stencil(eval_point, np.arange(nodes.shape[0]), phi[0], dphi[0], float(cond[0]))


def interpolate(stencil: Stencil, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != stencil.phi.shape:
        raise ValueError(
            f"expected {stencil.phi.size} nodal values, got {values.size}"
        )
    return float(stencil.phi @ values)


def build_stencils(source: NodeLattice, centers, kernel: RbfKernel, count: int = 12,
                   max_condition: float = MAX_CONDITION, chunk: int = 4096) -> StencilSet:
    """Shape functions at every point of ``centers`` over the ``count`` nearest
    nodes of ``source``.

    ``count >= source.size`` selects the global mode: every center uses the whole
    lattice and a single factorisation is shared.

    Raises
    ------
    IllConditionedStencil
        Carries the ids (rows of ``centers``) of every offending stencil.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if count >= source.size:
        return _build_global(source, centers, kernel, max_condition)
    if count < 1:
        raise ValueError("stencil size must be at least 1")
    table = neighbor_table(source, centers, count)
    m = centers.shape[0]
    dim = centers.shape[1]
    phi = np.empty((m, count))
    dphi = np.empty((m, dim, count))
    cond = np.empty(m)
    bad_all = np.zeros(m, dtype=bool)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        rel = source.positions[table[lo:hi]] - centers[lo:hi, None, :]
        p, dp, c, bad = _solve_batch(rel, kernel, max_condition)
        cond[lo:hi] = c
        bad_all[lo:hi] = bad
        if p is not None:
            phi[lo:hi] = p
            dphi[lo:hi] = dp
    if np.any(bad_all):
        raise _ill_conditioned(cond, bad_all, np.flatnonzero(bad_all))
    return StencilSet(table, phi, dphi, cond, source.size)


def _build_global(source, centers, kernel, max_condition):
    pts = source.positions
    alpha = kernel.alpha
    diff = pts[:, None, :] - pts[None, :, :]
    a = np.exp(-alpha * np.einsum("ijk,ijk->ij", diff, diff))
    cond = float(np.linalg.cond(a))
    m, n = centers.shape[0], pts.shape[0]
    if not cond <= max_condition:
        raise _ill_conditioned(np.full(m, cond), np.ones(m, dtype=bool), np.arange(m))
    lu = scipy.linalg.lu_factor(a)
    rel = pts[None, :, :] - centers[:, None, :]
    b = np.exp(-alpha * np.einsum("mjk,mjk->mj", rel, rel))
    phi = scipy.linalg.lu_solve(lu, b.T).T
    dim = centers.shape[1]
    dphi = np.empty((m, dim, n))
    for k in range(dim):
        db = 2.0 * alpha * rel[:, :, k] * b
        dphi[:, k, :] = scipy.linalg.lu_solve(lu, db.T).T
    table = np.broadcast_to(np.arange(n), (m, n)).copy()
    return StencilSet(table, phi, dphi, np.full(m, cond), n)


def evaluate_shape_functions(nodes, points, kernel: RbfKernel) -> np.ndarray:
    """Shape functions of fixed stencils evaluated at arbitrary points.

    Parameters
    ----------
    nodes : (m, N, dim) array
        Node coordinates of ``m`` stencils.
    points : (m, P, dim) array
        Evaluation points per stencil.

    Returns
    -------
    (m, P, N) array of ``Phi_j(points_p)``.
    """
    nodes = np.asarray(nodes, dtype=float)
    points = np.asarray(points, dtype=float)
    alpha = kernel.alpha
    diff = nodes[:, :, None, :] - nodes[:, None, :, :]
    a = np.exp(-alpha * np.einsum("mijk,mijk->mij", diff, diff))
    rel = points[:, :, None, :] - nodes[:, None, :, :]
    b = np.exp(-alpha * np.einsum("mpjk,mpjk->mpj", rel, rel))
    return np.transpose(np.linalg.solve(a, np.transpose(b, (0, 2, 1))), (0, 2, 1))
