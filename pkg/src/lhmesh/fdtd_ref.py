"""Dispersive 2D TM Yee-grid FDTD used as the reference solution.

Layout on an ``nc x nc`` cell grid of pitch ``dx`` (axis 0 = x):

* ``E_z`` (split into ``ezx + ezy``) and ``J`` at cell centres, shape (nc, nc)
* ``H_x`` and ``M_x`` on interior horizontal faces ``y = j dx``, shape (nc, nc-1)
* ``H_y`` and ``M_y`` on interior vertical faces ``x = i dx``, shape (nc-1, nc)

Tangential ``H`` on the outer walls is held at zero behind the PML.  Curls are
two-point differences; nothing here touches the meshless operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import C0, EPS0, MU0
from .excitation import WindowedSine
from .media import DrudeMedium, Slab
from .pml import PmlSpec, graded_sigma


class FdtdInstability(FloatingPointError):
    def __init__(self, step):
        super().__init__(f"FDTD produced non-finite values after step {step}")
        self.step = step


def courant_limit(dx: float, dy: float | None = None) -> float:
    dy = dx if dy is None else dy
    return 1.0 / (C0 * np.sqrt(1.0 / dx**2 + 1.0 / dy**2))


def _depth(coord, extent, thickness):
    if thickness <= 0:
        return np.zeros_like(coord)
    d = np.maximum(thickness - coord, coord - (extent - thickness))
    return np.clip(d, 0.0, thickness)


@dataclass
class YeeGridTM:
    extent: float
    nc: int
    dt: float
    # update coefficients
    hx_a: np.ndarray = field(repr=False)
    hx_b: np.ndarray = field(repr=False)
    hy_a: np.ndarray = field(repr=False)
    hy_b: np.ndarray = field(repr=False)
    ex_a: np.ndarray = field(repr=False)
    ex_b: np.ndarray = field(repr=False)
    ey_a: np.ndarray = field(repr=False)
    ey_b: np.ndarray = field(repr=False)
    mx_c1: np.ndarray = field(repr=False)
    mx_c2: np.ndarray = field(repr=False)
    my_c1: np.ndarray = field(repr=False)
    my_c2: np.ndarray = field(repr=False)
    j_c1: np.ndarray = field(repr=False)
    j_c2: np.ndarray = field(repr=False)
    # fields
    ezx: np.ndarray = field(repr=False)
    ezy: np.ndarray = field(repr=False)
    jzx: np.ndarray = field(repr=False)
    jzy: np.ndarray = field(repr=False)
    hx: np.ndarray = field(repr=False)
    hy: np.ndarray = field(repr=False)
    mx: np.ndarray = field(repr=False)
    my: np.ndarray = field(repr=False)
    q: int = 0
    source_cells: tuple = ()
    source_weights: np.ndarray | None = None
    signal: WindowedSine | None = None

    @property
    def dx(self) -> float:
        return self.extent / self.nc

    @property
    def ez(self) -> np.ndarray:
        return self.ezx + self.ezy

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.nc) + 0.5) * self.dx


def make_grid(extent: float, cell: float, pml: PmlSpec | None = None,
              slab: Slab | None = None, medium: DrudeMedium | None = None,
              courant: float = 0.95, dt: float | None = None) -> YeeGridTM:
    """Allocate a grid and freeze its coefficients.

    ``pml.thickness`` is a physical length; the profile is sampled at each
    field's own position.  ``dt`` defaults to ``courant`` times the 2D limit.
    """
    nc = int(round(extent / cell))
    dx = extent / nc
    limit = courant_limit(dx)
    if dt is None:
        dt = courant * limit
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"time step {dt:.4g} s exceeds the Courant limit {limit:.4g} s")
    centers = (np.arange(nc) + 0.5) * dx
    faces = np.arange(1, nc) * dx

    def sigma_e(coord):
        if pml is None:
            return np.zeros_like(coord)
        t = pml.thickness_along(0)
        return graded_sigma(pml, _depth(coord, extent, t))

    def drude(ycoord):
        if slab is None or medium is None:
            return np.zeros_like(ycoord), np.zeros_like(ycoord)
        # weight wp^2 by the share of the dual cell [y - dx/2, y + dx/2] inside
        # the slab, so faces on the interface count half
        lo = np.maximum(ycoord - dx / 2, slab.start)
        hi = np.minimum(ycoord + dx / 2, slab.end)
        frac = np.clip((hi - lo) / dx, 0.0, 1.0)
        return medium.omega_p * np.sqrt(frac), np.where(frac > 0, medium.gamma, 0.0)

    def loss(sig, xi):
        s = sig * dt / (2 * xi)
        return (1 - s) / (1 + s), (dt / xi) / (1 + s)

    def currents(wp, g, xi):
        gg = g * dt / 2
        return (1 - gg) / (1 + gg), xi * dt * wp**2 / (1 + gg)

    # H_x at (x_center_i, y_face_j): damped by sigma_my(y)
    hx_a, hx_b = loss(sigma_e(faces) * MU0 / EPS0, MU0)
    hx_a = np.broadcast_to(hx_a[None, :], (nc, nc - 1)).copy()
    hx_b = np.broadcast_to(hx_b[None, :], (nc, nc - 1)).copy()
    # H_y at (x_face_i, y_center_j): damped by sigma_mx(x)
    hy_a, hy_b = loss(sigma_e(faces) * MU0 / EPS0, MU0)
    hy_a = np.broadcast_to(hy_a[:, None], (nc - 1, nc)).copy()
    hy_b = np.broadcast_to(hy_b[:, None], (nc - 1, nc)).copy()
    ex_a, ex_b = loss(sigma_e(centers), EPS0)
    ex_a = np.broadcast_to(ex_a[:, None], (nc, nc)).copy()
    ex_b = np.broadcast_to(ex_b[:, None], (nc, nc)).copy()
    ey_a, ey_b = loss(sigma_e(centers), EPS0)
    ey_a = np.broadcast_to(ey_a[None, :], (nc, nc)).copy()
    ey_b = np.broadcast_to(ey_b[None, :], (nc, nc)).copy()

    wp_f, g_f = drude(faces)
    wp_c, g_c = drude(centers)
    mx_c1, mx_c2 = currents(wp_f, g_f, MU0)
    my_c1, my_c2 = currents(wp_c, g_c, MU0)
    j_c1, j_c2 = currents(wp_c, g_c, EPS0)
    z = np.zeros
    return YeeGridTM(
        extent=extent, nc=nc, dt=dt,
        hx_a=hx_a, hx_b=hx_b, hy_a=hy_a, hy_b=hy_b,
        ex_a=ex_a, ex_b=ex_b, ey_a=ey_a, ey_b=ey_b,
        mx_c1=np.broadcast_to(mx_c1[None, :], (nc, nc - 1)).copy(),
        mx_c2=np.broadcast_to(mx_c2[None, :], (nc, nc - 1)).copy(),
        my_c1=np.broadcast_to(my_c1[None, :], (nc - 1, nc)).copy(),
        my_c2=np.broadcast_to(my_c2[None, :], (nc - 1, nc)).copy(),
        j_c1=np.broadcast_to(j_c1[None, :], (nc, nc)).copy(),
        j_c2=np.broadcast_to(j_c2[None, :], (nc, nc)).copy(),
        ezx=z((nc, nc)), ezy=z((nc, nc)), jzx=z((nc, nc)), jzy=z((nc, nc)),
        hx=z((nc, nc - 1)), hy=z((nc - 1, nc)), mx=z((nc, nc - 1)), my=z((nc - 1, nc)),
    )


def place_source(grid: YeeGridTM, point, signal: WindowedSine) -> None:
    """Attach a soft source at the cell centre nearest ``point``.

    Cells tied for nearest (a point on a cell corner or edge) share the source
    equally.
    """
    c = grid.centers
    cells = []
    for coord in point:
        d = np.abs(c - coord)
        cells.append(np.flatnonzero(d <= d.min() + 1e-9 * grid.dx))
    ii, jj = np.meshgrid(cells[0], cells[1], indexing="ij")
    grid.source_cells = (ii.ravel(), jj.ravel())
    grid.source_weights = np.full(ii.size, 1.0 / ii.size)
    grid.signal = signal


def fdtd_step(grid: YeeGridTM) -> YeeGridTM:
    """One leapfrog step, in place, in the same phase order as the meshless engine."""
    g = grid
    inv = 1.0 / g.dx
    ez = g.ezx + g.ezy
    # H^{q+1/2}
    g.hx *= g.hx_a
    g.hx += g.hx_b * (-(ez[:, 1:] - ez[:, :-1]) * inv - g.mx)
    g.hy *= g.hy_a
    g.hy += g.hy_b * ((ez[1:, :] - ez[:-1, :]) * inv - g.my)
    # M^{q+1}
    g.mx *= g.mx_c1
    g.mx += g.mx_c2 * g.hx
    g.my *= g.my_c1
    g.my += g.my_c2 * g.hy
    # E^{q+1}
    dhy = np.diff(g.hy, axis=0, prepend=0.0, append=0.0) * inv
    dhx = np.diff(g.hx, axis=1, prepend=0.0, append=0.0) * inv
    g.ezx *= g.ex_a
    g.ezx += g.ex_b * (dhy - g.jzx)
    g.ezy *= g.ey_a
    g.ezy += g.ey_b * (-dhx - g.jzy)
    # J^{q+3/2}
    g.jzx *= g.j_c1
    g.jzx += g.j_c2 * g.ezx
    g.jzy *= g.j_c1
    g.jzy += g.j_c2 * g.ezy
    g.q += 1
    if g.signal is not None and g.source_weights is not None:
        inc = (g.dt / EPS0) * g.signal(g.q * g.dt)
        ii, jj = g.source_cells
        g.ezx[ii, jj] += 0.5 * inc * g.source_weights
        g.ezy[ii, jj] += 0.5 * inc * g.source_weights
    if not (np.isfinite(g.ezx).all() and np.isfinite(g.ezy).all()
            and np.isfinite(g.hx).all() and np.isfinite(g.hy).all()):
        raise FdtdInstability(g.q)
    return g


def sample_at(grid: YeeGridTM, points) -> np.ndarray:
    """Bilinear interpolation of ``E_z`` at arbitrary points of the domain.

    Between the outer wall and the first cell centre the nearest centre row
    or column is used.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts < -1e-12) or np.any(pts > grid.extent * (1 + 1e-12)):
        raise ValueError("sample point outside the FDTD domain")
    ez = grid.ez
    u = np.clip(pts / grid.dx - 0.5, 0.0, grid.nc - 1.0)
    i0 = np.minimum(np.floor(u).astype(int), grid.nc - 2)
    f = u - i0
    ix, iy = i0[:, 0], i0[:, 1]
    fx, fy = f[:, 0], f[:, 1]
    return ((1 - fx) * (1 - fy) * ez[ix, iy] + fx * (1 - fy) * ez[ix + 1, iy]
            + (1 - fx) * fy * ez[ix, iy + 1] + fx * fy * ez[ix + 1, iy + 1])


def record(grid: YeeGridTM, points, sample_times) -> np.ndarray:
    """Run until the last of ``sample_times`` and sample ``E_z`` at each.

    Each requested time is served by the step whose time is nearest to it.
    """
    sample_times = np.asarray(sample_times, dtype=float)
    targets = np.rint(sample_times / grid.dt).astype(int)
    out = np.empty((targets.size, np.atleast_2d(points).shape[0]))
    order = np.argsort(targets, kind="stable")
    for k in order:
        while grid.q < targets[k]:
            fdtd_step(grid)
        out[k] = sample_at(grid, points)
    return out
