"""Dispersive meshless leapfrog stepping with split-field PML.

Time layout (step ``q``): ``E`` and magnetic currents ``M`` live at integer
times, ``H`` and electric currents ``J`` at half-integer times.  One step runs
five phases, each writing one array family:

1. ``H^{q+1/2}`` from ``E^q`` and ``M^q``
2. ``M^{q+1}`` from ``H^{q+1/2}``
3. ``E^{q+1}`` from ``H^{q+1/2}`` and ``J^{q+1/2}``
4. ``J^{q+3/2}`` from ``E^{q+1}``
5. soft-source injection into ``E^{q+1}``

Split components are named after the axis of the derivative that drives them,
so ``hy_x`` is the part of ``H_y`` driven by ``dE_z/dx`` and damped by
``sigma_mx``.  In 2D TM only ``E_z`` is split (``ezx + ezy``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .constants import C0, EPS0, MU0
from .excitation import WindowedSine, inject_soft_source, injection_gain
from .lattice import NodeLattice
from .media import MaterialMap
from .pml import ConductivityField
from .rbf import RbfKernel, StencilSet, build_stencils

AXES = "xyz"

# (component, derivative axis, source component, sign) for
#   mu dH/dt = -curl E  and  eps dE/dt = curl H
H_TERMS = (
    ("x", "y", "z", -1.0), ("x", "z", "y", +1.0),
    ("y", "z", "x", -1.0), ("y", "x", "z", +1.0),
    ("z", "x", "y", -1.0), ("z", "y", "x", +1.0),
)
E_TERMS = (
    ("x", "y", "z", +1.0), ("x", "z", "y", -1.0),
    ("y", "z", "x", +1.0), ("y", "x", "z", -1.0),
    ("z", "x", "y", +1.0), ("z", "y", "x", -1.0),
)


class NumericalInstability(FloatingPointError):
    def __init__(self, step):
        super().__init__(f"non-finite field values after step {step}")
        self.step = step


@dataclass
class CurlOperators:
    """Sparse derivative operators between the two lattices.

    ``e_to_h[k]`` maps E-node values to d/dk at the H-nodes; ``h_to_e[k]`` the
    reverse.
    """

    e_to_h: list
    h_to_e: list
    e_stencils: StencilSet | None = None
    h_stencils: StencilSet | None = None

    @property
    def dim(self):
        return len(self.e_to_h)


def build_operators(e: NodeLattice, h: NodeLattice, kernel: RbfKernel,
                    stencil_size: int = 12) -> CurlOperators:
    """Shape-function derivative operators for both curl directions.

    Derivatives of E at an H-node use the ``stencil_size`` nearest E-nodes with
    shape functions evaluated at that H-node, and symmetrically for H.
    """
    at_h = build_stencils(e, h.positions, kernel, min(stencil_size, e.size))
    at_e = build_stencils(h, e.positions, kernel, min(stencil_size, h.size))
    return CurlOperators(
        e_to_h=[at_h.derivative_matrix(k) for k in range(e.dim)],
        h_to_e=[at_e.derivative_matrix(k) for k in range(e.dim)],
        e_stencils=at_h,
        h_stencils=at_e,
    )


def extrude_operators(ops: CurlOperators, layers: int, dz: float) -> CurlOperators:
    """Lift 2D operators to a z-periodic stack of ``layers`` identical planes.

    In-plane derivatives act layer by layer; d/dz is the periodic two-point
    difference between neighbouring E and H planes, which annihilates
    z-invariant fields exactly.
    """
    if ops.e_stencils is None or ops.h_stencils is None:
        raise ValueError("extrusion needs the 2D stencil sets")
    eye = sp.identity(layers, format="csr")
    # E plane k -> H plane k + 1/2, periodic
    fwd = sp.csr_matrix(sp.eye(layers, k=1) + sp.eye(layers, k=1 - layers) - sp.identity(layers)) / dz
    # H plane k - 1/2 -> E plane k
    bwd = sp.csr_matrix(-fwd.T)
    n_e = ops.h_to_e[0].shape[0]
    n_h = ops.e_to_h[0].shape[0]
    e_to_h = [sp.kron(eye, d, format="csr") for d in ops.e_to_h]
    h_to_e = [sp.kron(eye, d, format="csr") for d in ops.h_to_e]
    # z-differences need the other lattice's values at the same in-plane column
    e_to_h.append(sp.kron(fwd, ops.e_stencils.interpolation_matrix(), format="csr"))
    h_to_e.append(sp.kron(bwd, ops.h_stencils.interpolation_matrix(), format="csr"))
    for m in e_to_h + h_to_e:
        m.sort_indices()
    assert e_to_h[0].shape == (layers * n_h, layers * n_e)
    return CurlOperators(e_to_h, h_to_e)


@dataclass
class UpdateCoefficients:
    """Per-node leapfrog coefficients, frozen for a run.

    ``h_plus[:, k] = 1 / (1 + sigma_mk dt / 2 mu0)``,
    ``h_minus[:, k] = (1 - sigma_mk dt / 2 mu0) * h_plus[:, k]``; likewise for E
    with ``sigma_ek`` and ``eps0``.  Current updates read
    ``M <- m_c1 M + m_c2 H`` and ``J <- j_c1 J + j_c2 E``.  ``grad_e[k]`` and
    ``grad_h[k]`` are the derivative operators pre-scaled by ``dt/mu0`` and
    ``dt/eps0``.
    """

    dt: float
    h_plus: np.ndarray
    h_minus: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray
    m_c1: np.ndarray
    m_c2: np.ndarray
    j_c1: np.ndarray
    j_c2: np.ndarray
    grad_e: list
    grad_h: list
    dispersive_h: np.ndarray = field(default=None)
    dispersive_e: np.ndarray = field(default=None)

    @property
    def dim(self):
        return len(self.grad_e)


def step_size(d_min: float, divisor: float = 2.0, eps=EPS0, mu=MU0) -> float:
    """Time step ``(d_min / divisor) sqrt(eps mu)``; ``divisor = 1`` is the stability bound."""
    if not d_min > 0:
        raise ValueError("d_min must be positive")
    if divisor < 1:
        raise ValueError(f"divisor {divisor} < 1 exceeds the stability bound")
    return d_min / divisor * np.sqrt(eps * mu)


def _loss_coefficients(sigma, dt, xi):
    s = sigma * dt / (2.0 * xi)
    plus = 1.0 / (1.0 + s)
    return plus, (1.0 - s) * plus


def _current_coefficients(omega_p, gamma, dt, xi):
    g = gamma * dt / 2.0
    return (1.0 - g) / (1.0 + g), xi * dt * omega_p**2 / (1.0 + g)


def precompute(ops: CurlOperators, e_sigma: ConductivityField, h_sigma: ConductivityField,
               e_media: MaterialMap, h_media: MaterialMap, dt: float) -> UpdateCoefficients:
    """Freeze all per-node coefficients and scaled derivative operators."""
    h_plus, h_minus = _loss_coefficients(h_sigma.sigma_m, dt, MU0)
    e_plus, e_minus = _loss_coefficients(e_sigma.sigma_e, dt, EPS0)
    m_c1, m_c2 = _current_coefficients(h_media.omega_p, h_media.gamma, dt, MU0)
    j_c1, j_c2 = _current_coefficients(e_media.omega_p, e_media.gamma, dt, EPS0)
    return UpdateCoefficients(
        dt=dt,
        h_plus=h_plus, h_minus=h_minus, e_plus=e_plus, e_minus=e_minus,
        m_c1=m_c1, m_c2=m_c2, j_c1=j_c1, j_c2=j_c2,
        grad_e=[(dt / MU0) * d for d in ops.e_to_h],
        grad_h=[(dt / EPS0) * d for d in ops.h_to_e],
        dispersive_h=h_media.omega_p > 0,
        dispersive_e=e_media.omega_p > 0,
    )


@dataclass(frozen=True)
class PointSource:
    """Soft source at one E-node."""

    node: int
    signal: WindowedSine
    gain: float

    @classmethod
    def at(cls, lattice: NodeLattice, node: int, signal: WindowedSine, dt: float):
        if not lattice.interior[node]:
            raise ValueError(f"source node {node} lies inside the PML")
        return cls(int(node), signal, injection_gain(dt))


@dataclass
class SplitFieldStateTM:
    ezx: np.ndarray
    ezy: np.ndarray
    jzx: np.ndarray
    jzy: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    mx: np.ndarray
    my: np.ndarray
    q: int = 0

    @classmethod
    def zeros(cls, n_e: int, n_h: int):
        z = np.zeros
        return cls(z(n_e), z(n_e), z(n_e), z(n_e), z(n_h), z(n_h), z(n_h), z(n_h))

    @property
    def ez(self):
        return self.ezx + self.ezy

    def arrays(self):
        return (self.ezx, self.ezy, self.jzx, self.jzy, self.hx, self.hy, self.mx, self.my)

    def copy(self):
        return SplitFieldStateTM(*(a.copy() for a in self.arrays()), q=self.q)

    def all_finite(self):
        return all(np.isfinite(a).all() for a in self.arrays())


def step_tm(state: SplitFieldStateTM, coeffs: UpdateCoefficients,
            source: PointSource | None = None) -> SplitFieldStateTM:
    """Advance a 2D TM state by one step, in place."""
    c = coeffs
    dt = c.dt
    ez = state.ezx + state.ezy
    # phase 1: magnetic field
    state.hx *= c.h_minus[:, 1]
    state.hx += c.h_plus[:, 1] * (-(c.grad_e[1] @ ez) - (dt / MU0) * state.mx)
    state.hy *= c.h_minus[:, 0]
    state.hy += c.h_plus[:, 0] * ((c.grad_e[0] @ ez) - (dt / MU0) * state.my)
    # phase 2: magnetic currents
    state.mx *= c.m_c1
    state.mx += c.m_c2 * state.hx
    state.my *= c.m_c1
    state.my += c.m_c2 * state.hy
    # phase 3: electric field
    state.ezx *= c.e_minus[:, 0]
    state.ezx += c.e_plus[:, 0] * ((c.grad_h[0] @ state.hy) - (dt / EPS0) * state.jzx)
    state.ezy *= c.e_minus[:, 1]
    state.ezy += c.e_plus[:, 1] * (-(c.grad_h[1] @ state.hx) - (dt / EPS0) * state.jzy)
    # phase 4: electric currents
    state.jzx *= c.j_c1
    state.jzx += c.j_c2 * state.ezx
    state.jzy *= c.j_c1
    state.jzy += c.j_c2 * state.ezy
    state.q += 1
    # phase 5: soft source at t = (q+1) dt
    if source is not None:
        s = source.signal(state.q * dt)
        i = source.node
        state.ezx[i], state.ezy[i] = inject_soft_source(
            state.ezx[i], state.ezy[i], s, dt, source.gain)
    if not state.all_finite():
        raise NumericalInstability(state.q)
    return state


def _split_keys(terms):
    return [a + b for a, b, _, _ in terms]


@dataclass
class SplitFieldState3D:
    """Twelve split field components and one current per split component.

    Keys are ``component + derivative axis``, e.g. ``h["yx"]`` is the part of
    ``H_y`` driven by ``dE_z/dx``; ``m`` and ``j`` use the same keys.
    """

    h: dict
    e: dict
    m: dict
    j: dict
    q: int = 0

    @classmethod
    def zeros(cls, n_e: int, n_h: int):
        hk, ek = _split_keys(H_TERMS), _split_keys(E_TERMS)
        return cls(
            {k: np.zeros(n_h) for k in hk}, {k: np.zeros(n_e) for k in ek},
            {k: np.zeros(n_h) for k in hk}, {k: np.zeros(n_e) for k in ek},
        )

    def field(self, kind: str, comp: str):
        """Physical component, e.g. ``field("E", "z") = E_zx + E_zy``."""
        parts = self.e if kind == "E" else self.h
        a, b = [k for k in parts if k[0] == comp]
        return parts[a] + parts[b]

    @property
    def ez(self):
        return self.field("E", "z")

    def arrays(self):
        for d in (self.h, self.e, self.m, self.j):
            yield from d.values()

    def copy(self):
        cp = lambda d: {k: v.copy() for k, v in d.items()}
        return SplitFieldState3D(cp(self.h), cp(self.e), cp(self.m), cp(self.j), self.q)

    def all_finite(self):
        return all(np.isfinite(a).all() for a in self.arrays())


def step_3d(state: SplitFieldState3D, coeffs: UpdateCoefficients,
            source: PointSource | None = None) -> SplitFieldState3D:
    """Advance a 3D state by one step, in place (24 field/current phases)."""
    c = coeffs
    dt = c.dt
    e_tot = {comp: state.field("E", comp) for comp in AXES}
    for comp, ax, src, sign in H_TERMS:
        k = AXES.index(ax)
        key = comp + ax
        curl = sign * (c.grad_e[k] @ e_tot[src])
        h = state.h[key]
        h *= c.h_minus[:, k]
        h += c.h_plus[:, k] * (curl - (dt / MU0) * state.m[key])
    for key, h in state.h.items():
        m = state.m[key]
        m *= c.m_c1
        m += c.m_c2 * h
    h_tot = {comp: state.field("H", comp) for comp in AXES}
    for comp, ax, src, sign in E_TERMS:
        k = AXES.index(ax)
        key = comp + ax
        curl = sign * (c.grad_h[k] @ h_tot[src])
        e = state.e[key]
        e *= c.e_minus[:, k]
        e += c.e_plus[:, k] * (curl - (dt / EPS0) * state.j[key])
    for key, e in state.e.items():
        j = state.j[key]
        j *= c.j_c1
        j += c.j_c2 * e
    state.q += 1
    if source is not None:
        s = source.signal(state.q * dt)
        i = source.node
        state.e["zx"][i], state.e["zy"][i] = inject_soft_source(
            state.e["zx"][i], state.e["zy"][i], s, dt, source.gain)
    if not state.all_finite():
        raise NumericalInstability(state.q)
    return state


@dataclass
class RunResult:
    times: np.ndarray            # (steps,) seconds, time of E after each step
    probes: np.ndarray           # (steps, n_probes) reconstructed E_z
    snapshots: dict              # step -> E_z copy
    state: object


def run(state, coeffs: UpdateCoefficients, steps: int, source: PointSource | None = None,
        probes=(), snapshot_steps=(), observer=None) -> RunResult:
    """Advance ``steps`` steps, sampling ``E_z`` at ``probes`` after every step.

    ``observer(state)`` is called after each step when given.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    stepper = step_3d if isinstance(state, SplitFieldState3D) else step_tm
    probes = np.asarray(probes, dtype=np.int64)
    wanted = set(int(s) for s in snapshot_steps)
    times = np.empty(steps)
    series = np.empty((steps, probes.size))
    snaps = {}
    if 0 in wanted:
        snaps[state.q] = state.ez.copy()
    for n in range(steps):
        stepper(state, coeffs, source)
        times[n] = state.q * coeffs.dt
        ez = state.ez
        series[n] = ez[probes]
        if state.q in wanted:
            snaps[state.q] = ez.copy()
        if observer is not None:
            observer(state)
    return RunResult(times, series, snaps, state)


def courant_number(coeffs: UpdateCoefficients, d_min: float) -> float:
    return C0 * coeffs.dt / d_min
