"""Invariant checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`CheckResult` with the measured value and the
threshold it was held to.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .constants import C0, EPS0, MU0
from .engine import (
    PointSource, SplitFieldState3D, SplitFieldStateTM, build_operators,
    extrude_operators, precompute, run, step_3d, step_size, step_tm,
    _current_coefficients,
)
from .excitation import WindowedSine
from .lattice import build_staggered_lattice
from .media import DrudeMedium, MaterialMap, Slab, assign_media, relative_permeability, relative_permittivity
from .pml import ConductivityField, PmlSpec, assign_conductivities
from .rbf import RbfKernel, build_shape_functions, build_stencils, evaluate_shape_functions

# Time-averaged image-plane L2 of the default scenario against the FDTD
# reference measured 7.01; the gate leaves about 14 % headroom.
ORACLE_L2_THRESHOLD = 8.6


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.value:.4g} (threshold {self.threshold:.4g}) {self.detail}".rstrip()

    def to_dict(self):
        d = asdict(self)
        d["value"] = float(d["value"])
        d["threshold"] = float(d["threshold"])
        return d


def drude_matching(f0=30e9, omega_p=2.666e11, tol=0.01) -> CheckResult:
    """Relative permittivity and permeability at ``f0`` equal -1."""
    med = DrudeMedium(omega_p, 0.0)
    w = 2 * np.pi * f0
    eps_r = complex(relative_permittivity(med, w))
    mu_r = complex(relative_permeability(med, w))
    dev = max(abs(eps_r + 1), abs(mu_r + 1))
    return CheckResult("drude", dev <= tol, dev, tol,
                       f"eps_r={eps_r.real:.5f} mu_r={mu_r.real:.5f}")


def delta_property(extent=0.03, nodes=61, alpha_c=0.5, stencil_size=12, tol=1e-8) -> CheckResult:
    """``|Phi_j(x_i) - delta_ij|`` over every stencil of both lattices."""
    e, h = build_staggered_lattice(extent, nodes)
    kernel = RbfKernel(alpha_c, e.d_min)
    worst = 0.0
    for src, centers in ((e, h.positions), (h, e.positions)):
        st = build_stencils(src, centers, kernel, stencil_size)
        pts = src.positions[st.indices]
        for lo in range(0, len(st), 2048):
            blk = pts[lo:lo + 2048]
            phi = evaluate_shape_functions(blk, blk, kernel)
            worst = max(worst, float(np.max(np.abs(phi - np.eye(blk.shape[1])))))
    return CheckResult("delta_property", worst <= tol, worst, tol, f"alpha_c={alpha_c}")


def random_stencils(count, rng, size=12, spacing=5e-4, dim=2):
    """Jittered-lattice node clouds with an evaluation point near the middle."""
    side = int(np.ceil(np.sqrt(size))) + 1
    base = np.stack(np.meshgrid(*[np.arange(side)] * dim, indexing="ij"), -1).reshape(-1, dim)
    out_nodes, out_pts = [], []
    for _ in range(count):
        jitter = rng.uniform(-0.3, 0.3, base.shape)
        cloud = (base + jitter) * spacing
        pick = rng.choice(len(cloud), size, replace=False)
        nodes = cloud[pick]
        lo, hi = nodes.min(0), nodes.max(0)
        out_nodes.append(nodes)
        out_pts.append(lo + rng.uniform(0.25, 0.75, dim) * (hi - lo))
    return np.array(out_nodes), np.array(out_pts)


def derivative_fidelity(count=120, seed=0, alpha_c=0.5, tol=1e-5, spacing=5e-4) -> CheckResult:
    """Analytic shape-function gradients against central differences."""
    rng = np.random.default_rng(seed)
    nodes, pts = random_stencils(count, rng, spacing=spacing)
    kernel = RbfKernel(alpha_c, spacing)
    dim = pts.shape[1]
    step = 1e-4 * spacing
    offsets = np.concatenate([np.eye(dim), -np.eye(dim)]) * step
    probe = pts[:, None, :] + np.concatenate([np.zeros((1, dim)), offsets])[None]
    phi = evaluate_shape_functions(nodes, probe, kernel)
    fd = (phi[:, 1:1 + dim] - phi[:, 1 + dim:]) / (2 * step)          # (m, dim, N)
    worst = 0.0
    for i in range(count):
        exact = build_shape_functions(nodes[i], pts[i], kernel).dphi
        rel = np.max(np.abs(exact - fd[i])) / np.max(np.abs(exact))
        worst = max(worst, float(rel))
    return CheckResult("derivative_fidelity", worst <= tol, worst, tol, f"{count} stencils")


def _tm_setup(extent, nodes, layers, alpha_c=0.5, slab=None, medium=None, divisor=2.0):
    e, h = build_staggered_lattice(extent, nodes, layers)
    d = e.d_min
    ops = build_operators(e, h, RbfKernel(alpha_c, d), 12)
    spec = PmlSpec(thickness=layers * d) if layers else None
    coeffs = precompute(ops, assign_conductivities(e, spec), assign_conductivities(h, spec),
                        assign_media(e, slab, medium), assign_media(h, slab, medium),
                        step_size(d, divisor))
    return e, h, ops, coeffs


def _pulse_state(e, h, center, width):
    st = SplitFieldStateTM.zeros(e.size, h.size)
    r2 = np.sum((e.positions - center) ** 2, axis=1)
    st.ezx[:] = 0.5 * np.exp(-r2 / width**2)
    st.ezy[:] = st.ezx
    return st


def pml_absorption(nodes=61, extent=0.03, layers=3, enlarge=3, tol=1e-2,
                   probes=((0.015, 0.004), (0.004, 0.004)), width_nodes=4.0) -> CheckResult:
    """Cylindrical pulse in an empty PML-terminated box against a larger box.

    A Gaussian ``E_z`` hump of width ``width_nodes`` spacings is released at the
    box centre.  The same hump is released at the centre of a box ``enlarge``
    times wider.  Probe traces are compared until the first echo from the
    larger box's own PML could arrive.
    """
    small = _tm_setup(extent, nodes, layers)
    big_n = enlarge * (nodes - 1) + 1
    big = _tm_setup(enlarge * extent, big_n, layers)
    d = small[0].d_min
    width = width_nodes * d
    shift = (enlarge - 1) * extent / 2
    center = np.array([extent / 2, extent / 2])
    # earliest echo: mirror the pulse centre in each inner PML face of the big box
    pml_t = layers * d
    big_ext = enlarge * extent
    t_end = np.inf
    for p in probes:
        q = np.asarray(p) + shift
        s = center + shift
        for k in range(2):
            for wall in (pml_t, big_ext - pml_t):
                img = s.copy()
                img[k] = 2 * wall - s[k]
                t_end = min(t_end, (np.linalg.norm(q - img) - 2 * width) / C0)
    dt = small[3].dt
    steps = int(np.floor(t_end / dt))
    traces = []
    for (e, h, _, coeffs), off in ((small, 0.0), (big, shift)):
        nodes_p = [e.nearest_node(np.asarray(p) + off) for p in probes]
        st = _pulse_state(e, h, center + off, width)
        traces.append(run(st, coeffs, steps, probes=nodes_p).probes)
    a, b = traces
    dev = float(np.max(np.max(np.abs(a - b), axis=0) / np.max(np.abs(b), axis=0)))
    return CheckResult("pml_absorption", dev <= tol, dev, tol, f"{steps} steps, {layers} layers")


def free_space_reduction(nodes=21, steps=40, seed=0) -> CheckResult:
    """Vacuum, no PML: unit loss coefficients and currents frozen at zero."""
    e, h, _, c = _tm_setup(0.01, nodes, 0)
    ident = max(float(np.max(np.abs(x - 1))) for x in (c.h_plus, c.h_minus, c.e_plus, c.e_minus, c.m_c1, c.j_c1))
    ident = max(ident, float(np.max(np.abs(c.m_c2))), float(np.max(np.abs(c.j_c2))))
    rng = np.random.default_rng(seed)
    st = SplitFieldStateTM.zeros(e.size, h.size)
    st.ezx[:] = rng.standard_normal(e.size)
    st.ezy[:] = rng.standard_normal(e.size)
    run(st, c, steps)
    cur = max(float(np.max(np.abs(x))) for x in (st.jzx, st.jzy, st.mx, st.my))
    value = max(ident, cur)
    return CheckResult("free_space_reduction", value == 0.0, value, 0.0)


def extruded_coefficients(ops2d, e_sigma, h_sigma, e_media, h_media, dt, layers, dz):
    """3D coefficients for a z-periodic stack of identical 2D planes."""
    ops3 = extrude_operators(ops2d, layers, dz)

    def tile_sigma(f):
        pad = lambda a: np.tile(np.hstack([a[:, :2], np.zeros((a.shape[0], 1))]), (layers, 1))
        return ConductivityField(pad(f.sigma_e), pad(f.sigma_m))

    def tile_media(m):
        return MaterialMap(np.tile(m.omega_p, layers), np.tile(m.gamma, layers), np.tile(m.in_slab, layers))

    return precompute(ops3, tile_sigma(e_sigma), tile_sigma(h_sigma),
                      tile_media(e_media), tile_media(h_media), dt)


def consistency_3d(nodes=11, layers=5, steps=30, seed=0, tol=1e-10) -> CheckResult:
    """A z-invariant 3D run against the 2D TM run, compared after every step."""
    extent = 0.005
    e, h = build_staggered_lattice(extent, nodes, 2)
    d = e.d_min
    ops = build_operators(e, h, RbfKernel(0.5, d), 12)
    spec = PmlSpec(thickness=2 * d)
    slab = Slab(0.4 * extent, 0.3 * extent)
    med = DrudeMedium(2.666e11, 1e9)
    es, hs = assign_conductivities(e, spec), assign_conductivities(h, spec)
    em, hm = assign_media(e, slab, med), assign_media(h, slab, med)
    dt = step_size(d)
    c2 = precompute(ops, es, hs, em, hm, dt)
    c3 = extruded_coefficients(ops, es, hs, em, hm, dt, layers, d)

    rng = np.random.default_rng(seed)
    s2 = SplitFieldStateTM.zeros(e.size, h.size)
    s2.ezx[:] = rng.standard_normal(e.size)
    s2.ezy[:] = rng.standard_normal(e.size)
    s3 = SplitFieldState3D.zeros(e.size * layers, h.size * layers)
    s3.e["zx"][:] = np.tile(s2.ezx, layers)
    s3.e["zy"][:] = np.tile(s2.ezy, layers)
    worst = 0.0
    for _ in range(steps):
        step_tm(s2, c2)
        step_3d(s3, c3)
        pairs = ((s3.e["zx"], s2.ezx), (s3.e["zy"], s2.ezy),
                 (s3.h["xy"] + s3.h["xz"], s2.hx), (s3.h["yx"] + s3.h["yz"], s2.hy),
                 (s3.j["zx"], s2.jzx), (s3.m["xy"] + s3.m["xz"], s2.mx))
        for a3, a2 in pairs:
            scale = max(1.0, float(np.max(np.abs(a2))))
            worst = max(worst, float(np.max(np.abs(a3.reshape(layers, -1) - a2[None]))) / scale)
        for comp in ("x", "y"):
            worst = max(worst, float(np.max(np.abs(s3.field("E", comp)))))
        worst = max(worst, float(np.max(np.abs(s3.field("H", "z")))) * np.sqrt(MU0 / EPS0))
    return CheckResult("consistency_3d", worst <= tol, worst, tol,
                       f"{nodes}x{nodes}x{layers}, {steps} steps")


def ade_convergence(omega_p=2.666e11, gamma=0.0, f=30e9, t_end=1.7e-10, dt=1e-12, ratio=3.5) -> CheckResult:
    """Discrete current update against the exact solution for a sinusoidal drive.

    ``dM/dt = -gamma M + mu0 omega_p^2 H`` with ``H = sin(w t)`` and ``M(0) = 0``;
    the drive is sampled at half steps as in the leapfrog layout.
    """
    w = 2 * np.pi * f
    k = MU0 * omega_p**2

    def exact(t):
        # particular + homogeneous solution with M(0) = 0
        if gamma == 0:
            return k * (1 - np.cos(w * t)) / w
        den = gamma**2 + w**2
        part = k * (gamma * np.sin(w * t) - w * np.cos(w * t)) / den
        return part + k * w / den * np.exp(-gamma * t)

    def err(step):
        n = int(round(t_end / step))
        c1, c2 = _current_coefficients(omega_p, gamma, step, MU0)
        m = 0.0
        for q in range(n):
            m = c1 * m + c2 * np.sin(w * (q + 0.5) * step)
        return abs(m - exact(n * step))

    e1, e2 = err(dt), err(dt / 2)
    r = e1 / e2
    return CheckResult("ade_convergence", r >= ratio, r, ratio, f"gamma={gamma:g}")


def stability(steps=3000, bound=10.0) -> CheckResult:
    """Default lossless slab scenario: late fields stay below ``bound`` x the source-era peak."""
    slab = Slab(0.01, 0.01)
    e, h, _, c = _tm_setup(0.03, 61, 3, slab=slab, medium=DrudeMedium(2.666e11, 0.0))
    sig = WindowedSine()
    src = PointSource.at(e, e.nearest_node((0.015, 0.025)), sig, c.dt)
    peaks = np.empty(steps)

    def watch(st):
        peaks[st.q - 1] = np.max(np.abs(st.ezx + st.ezy))

    run(SplitFieldStateTM.zeros(e.size, h.size), c, steps, src, observer=watch)
    era = np.arange(1, steps + 1) * c.dt <= sig.duration
    ratio = float(peaks[~era].max() / peaks[era].max()) if np.any(~era) else 0.0
    return CheckResult("stability", ratio <= bound, ratio, bound, f"{steps} steps")
