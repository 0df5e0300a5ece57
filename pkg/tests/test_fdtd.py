import ast
import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lhmesh import fdtd_ref
from lhmesh.constants import C0, ETA0, MU0
from lhmesh.excitation import WindowedSine
from lhmesh.fdtd_ref import FdtdInstability, courant_limit, fdtd_step, make_grid, place_source, record, sample_at
from lhmesh.media import DrudeMedium, Slab
from lhmesh.pml import PmlSpec
from oracles import bilinear_oracle


def test_zero_grid_stays_zero():
    g = make_grid(0.01, 5e-4, PmlSpec(thickness=1.5e-3), Slab(0.003, 0.004), DrudeMedium(2.666e11, 1e9))
    for _ in range(10):
        fdtd_step(g)
    assert g.q == 10
    assert not np.any(g.ez) and not np.any(g.hx) and not np.any(g.hy)


def test_courant_bound_enforced():
    limit = courant_limit(1e-4)
    assert limit == pytest.approx(1e-4 / (C0 * np.sqrt(2)))
    assert make_grid(0.01, 1e-4).dt == pytest.approx(0.95 * limit)
    with pytest.raises(ValueError, match="Courant"):
        make_grid(0.01, 1e-4, dt=1.01 * limit)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_aborts():
    g = make_grid(0.01, 5e-4)
    g.ezx[3, 3] = np.inf
    with pytest.raises(FdtdInstability) as exc:
        fdtd_step(g)
    assert exc.value.step == 1


# --- sampling ----------------------------------------------------------------

def _filled(nc=8, seed=0):
    g = make_grid(nc * 1e-3, 1e-3)
    rng = np.random.default_rng(seed)
    g.ezx[:] = rng.standard_normal((nc, nc))
    g.ezy[:] = rng.standard_normal((nc, nc))
    return g


def test_sample_at_cell_centre_and_midpoint():
    g = _filled()
    c = g.centers
    assert sample_at(g, [c[2], c[5]])[0] == pytest.approx(g.ez[2, 5], abs=1e-14)
    mid = sample_at(g, [(c[2] + c[3]) / 2, c[5]])[0]
    assert mid == pytest.approx((g.ez[2, 5] + g.ez[3, 5]) / 2, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0, 8e-3), y=st.floats(0, 8e-3), seed=st.integers(0, 100))
def test_sample_at_matches_brute_force_bilinear(x, y, seed):
    g = _filled(seed=seed)
    want = bilinear_oracle(g.ez.copy(), g.dx, (x, y))
    assert sample_at(g, [x, y])[0] == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("pt", [(-1e-4, 0.004), (0.004, 0.0081)])
def test_sample_outside_domain_raises(pt):
    with pytest.raises(ValueError, match="outside"):
        sample_at(_filled(), pt)


def test_source_ties_share_the_cells():
    g = make_grid(0.01, 1e-3)
    place_source(g, (0.005, 0.0055), WindowedSine())   # x on a cell edge, y on a centre
    ii, jj = g.source_cells
    assert sorted(ii) == [4, 5] and set(jj) == {5}
    assert np.allclose(g.source_weights, 0.5)
    place_source(g, (0.0055, 0.0055), WindowedSine())
    assert g.source_weights.tolist() == [1.0]


def test_record_uses_nearest_step():
    g = make_grid(0.01, 5e-4)
    place_source(g, (0.005, 0.005), WindowedSine())
    out = record(g, [(0.005, 0.005)], [3.4 * g.dt, 0.0])
    assert g.q == 3
    assert out[1, 0] == 0.0 and out[0, 0] != 0.0


# --- propagation ---------------------------------------------------------------

def test_vacuum_plane_pulse_moves_at_c():
    g = make_grid(0.04, 2e-4)
    x0, w = 0.012, 2e-3
    f = lambda x: np.exp(-((x - x0) / w) ** 2)
    ez = np.broadcast_to(f(g.centers)[:, None], (g.nc, g.nc))
    g.ezx[:] = ez / 2
    g.ezy[:] = ez / 2
    faces = np.arange(1, g.nc) * g.dx
    g.hy[:] = -f(faces + C0 * g.dt / 2)[:, None] / ETA0
    x = g.centers

    def centroid():
        p = g.ez[:, g.nc // 2] ** 2
        return np.sum(x * p) / np.sum(p)

    c0 = centroid()
    steps = 60
    for _ in range(steps):
        fdtd_step(g)
    assert (centroid() - c0) / (steps * g.dt) == pytest.approx(C0, rel=0.01)


def test_matched_slab_barely_reflects():
    # line source (plane wave at normal incidence) above a matched slab; the
    # reflected part is the difference from the same run without the slab
    sig = WindowedSine(m=5, n=10)
    ext, cell = 0.06, 5e-4
    ys, yp = 0.038, 0.042
    times = np.arange(0, 20 * sig.period, sig.period / 40)
    traces = []
    for slab in (Slab(0.018, 0.01), None):
        g = make_grid(ext, cell, PmlSpec(thickness=1.5e-3), slab, DrudeMedium(2.666e11, 0.0))
        place_source(g, (ext / 2, ys), sig)
        j = g.source_cells[1][0]
        g.source_cells = (np.arange(g.nc), np.full(g.nc, j))
        g.source_weights = np.ones(g.nc)
        traces.append(record(g, [(ext / 2, yp)], times)[:, 0])
    with_slab, free = traces
    steady = (times > 10 * sig.period) & (times < 15 * sig.period)
    reflected = np.max(np.abs(with_slab - free)[steady])
    assert reflected < 0.05 * np.max(np.abs(free)[steady])


def _gaussian_run(cell, probes, steps_coarse, cell_coarse):
    ext, w = 0.016, 1.5e-3
    g = make_grid(ext, cell)
    dt = g.dt
    ctr = ext / 2
    ez = lambda x, y: np.exp(-((x - ctr) ** 2 + (y - ctr) ** 2) / w**2)
    c = g.centers
    faces = np.arange(1, g.nc) * g.dx
    e0 = ez(c[:, None], c[None, :])
    g.ezx[:] = e0 / 2
    g.ezy[:] = e0 / 2
    # H at -dt/2 from one Taylor step of the curl of the initial field
    dy = -2 * (faces[None, :] - ctr) / w**2 * ez(c[:, None], faces[None, :])
    dx = -2 * (faces[:, None] - ctr) / w**2 * ez(faces[:, None], c[None, :])
    g.hx[:] = dt / (2 * MU0) * dy
    g.hy[:] = -dt / (2 * MU0) * dx
    k = int(round(cell_coarse / cell))
    out = []
    for _ in range(steps_coarse):
        for _ in range(k):
            fdtd_step(g)
        out.append(sample_at(g, probes))
    return np.array(out)


def test_grid_refinement_is_at_least_second_order_sane():
    probes = [(0.011, 0.008), (0.010, 0.010), (0.008, 0.0125)]
    h = 4e-4
    runs = [_gaussian_run(h / k, probes, 14, h) for k in (1, 2, 4)]
    coarse_err = np.max(np.abs(runs[0] - runs[1]))
    fine_err = np.max(np.abs(runs[1] - runs[2]))
    assert coarse_err / fine_err >= 2.0


def test_reference_shares_no_curl_code_with_the_meshless_engine():
    tree = ast.parse(inspect.getsource(fdtd_ref))
    mods = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            mods.add(node.module)
        elif isinstance(node, ast.Import):
            mods.update(a.name for a in node.names)
    assert not {m for m in mods if m and ("rbf" in m or "engine" in m or "lattice" in m)}


def test_interface_faces_carry_half_the_plasma_term():
    g = make_grid(0.01, 1e-3, slab=Slab(0.003, 0.004), medium=DrudeMedium(2e11))
    c2 = g.mx_c2[0]                 # H_x faces at y = 1, 2, ... 9 mm
    assert c2[2] == pytest.approx(c2[3] / 2) and c2[6] == pytest.approx(c2[3] / 2)
    assert c2[1] == 0 and c2[7] == 0
    assert np.all(g.j_c2[0, 3:7] == g.j_c2[0, 3]) and g.j_c2[0, 2] == 0
