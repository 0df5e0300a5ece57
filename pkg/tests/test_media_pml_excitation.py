import numpy as np
import pytest
from hypothesis import given, strategies as st

from lhmesh.constants import EPS0, ETA0, MU0
from lhmesh.excitation import WindowedSine, evaluate, inject_soft_source, injection_gain
from lhmesh.lattice import build_staggered_lattice
from lhmesh.media import (
    DrudeMedium, Slab, assign_media, lh_plasma_frequency_for, permeability, permittivity,
    relative_permeability, relative_permittivity,
)
from lhmesh.pml import PmlSpec, assign_conductivities, graded_sigma, sigma_max

W0 = 2 * np.pi * 30e9


# --- media -----------------------------------------------------------------

def test_matched_slab_is_minus_one_at_30ghz():
    m = DrudeMedium(2.666e11, 0.0)
    assert relative_permittivity(m, W0).real == pytest.approx(-1.0, rel=1e-2)
    assert relative_permeability(m, W0).real == pytest.approx(-1.0, rel=1e-2)
    assert permittivity(m, W0) == pytest.approx(EPS0 * relative_permittivity(m, W0))
    assert permeability(m, W0) == pytest.approx(MU0 * relative_permeability(m, W0))


def test_drude_formula_and_loss_sign():
    m = DrudeMedium(2e11, 1e10)
    w = 1.5e11
    want = 1 - 2e11**2 / (w**2 - 1j * 1e10 * w)
    assert relative_permittivity(m, w) == pytest.approx(want)
    # exp(+j w t) convention: lossy media have a negative imaginary part
    assert relative_permittivity(m, w).imag < 0


def test_vacuum_and_pole():
    assert relative_permittivity(DrudeMedium(), W0) == 1
    with pytest.raises(ZeroDivisionError):
        relative_permittivity(DrudeMedium(1e11, 0.0), 0.0)
    with pytest.raises(ValueError):
        DrudeMedium(-1.0)


@given(st.floats(1e9, 1e12), st.floats(-10.0, 0.9))
def test_plasma_frequency_inverse(w0, target):
    wp = lh_plasma_frequency_for(w0, target)
    assert relative_permittivity(DrudeMedium(wp), w0).real == pytest.approx(target, abs=1e-9)


def test_plasma_frequency_for_minus_one():
    assert lh_plasma_frequency_for(W0) == pytest.approx(2.6657e11, rel=1e-4)


def test_slab_assignment_includes_faces():
    e, _ = build_staggered_lattice(0.03, 61)
    slab = Slab(0.01, 0.01)
    mm = assign_media(e, slab, DrudeMedium(2.666e11))
    rows = e.grid_view(mm.in_slab)[30]
    assert rows.sum() == 21          # y = 10 mm .. 20 mm inclusive
    assert rows[20] and rows[40] and not rows[19] and not rows[41]
    assert np.all(mm.omega_p[~mm.in_slab] == 0)
    assert assign_media(e, None, None).omega_p.sum() == 0


# --- pml -------------------------------------------------------------------

def test_sigma_max_for_three_layers():
    spec = PmlSpec(order=2, r_th=1e-3, thickness=1.5e-3)
    want = -3 * np.log(1e-3) / (2 * ETA0 * 1.5e-3)
    assert sigma_max(spec) == pytest.approx(want)
    assert sigma_max(spec) == pytest.approx(18.34, rel=1e-3)


def test_graded_profile():
    spec = PmlSpec(thickness=1.5e-3)
    assert graded_sigma(spec, 0.0) == 0.0
    assert graded_sigma(spec, 1.5e-3) == pytest.approx(sigma_max(spec))
    assert graded_sigma(spec, 0.75e-3) == pytest.approx(sigma_max(spec) / 4)
    with pytest.raises(ValueError):
        graded_sigma(spec, 2e-3)
    with pytest.raises(ValueError):
        PmlSpec(r_th=1.5)


@given(st.floats(0, 1.5e-3), st.floats(0, 1.5e-3))
def test_grading_is_monotone(a, b):
    spec = PmlSpec(thickness=1.5e-3)
    lo, hi = sorted((a, b))
    assert graded_sigma(spec, lo) <= graded_sigma(spec, hi)


def test_face_edge_assignment_and_matching():
    e, h = build_staggered_lattice(0.03, 61, 3)
    spec = PmlSpec(thickness=1.5e-3)
    for lat in (e, h):
        f = assign_conductivities(lat, spec)
        assert np.allclose(f.sigma_m, f.sigma_e * MU0 / EPS0)
        assert np.all(f.sigma_e[lat.interior] == 0)
        assert np.all(f.sigma_e[:, 2] == 0)
    f = assign_conductivities(e, spec)
    corner = e.index_of((0, 0))
    face = e.index_of((0, 30))
    assert f.sigma_e[corner, 0] == f.sigma_e[corner, 1] == pytest.approx(sigma_max(spec))
    assert f.sigma_e[face, 1] == 0 and f.sigma_e[face, 0] > 0


# --- excitation ------------------------------------------------------------

def test_window_shape():
    s = WindowedSine()
    tp = s.period
    assert s.duration == pytest.approx(20 * tp)
    assert evaluate(s, -1e-12) == 0.0
    assert evaluate(s, 21 * tp) == 0.0
    # full amplitude during the hold
    assert evaluate(s, 7.25 * tp) == pytest.approx(1.0)
    # on the ramp the envelope is 10x^3 - 15x^4 + 6x^5 with x = t / (m T)
    t = 2.75 * tp
    x = 0.55
    assert evaluate(s, t) == pytest.approx((10 * x**3 - 15 * x**4 + 6 * x**5) * np.sin(2 * np.pi * 30e9 * t))
    # and mirrored on the way down
    t = 17.25 * tp
    x = 0.45
    assert evaluate(s, t) == pytest.approx((1 - (10 * x**3 - 15 * x**4 + 6 * x**5)) * np.sin(2 * np.pi * 30e9 * t))


@given(st.floats(0, 25 / 30e9))
def test_window_bounded(t):
    assert abs(evaluate(WindowedSine(), t)) <= 1.0 + 1e-12


def test_window_is_continuous_at_the_joins():
    s = WindowedSine()
    for k in (5, 15, 20):
        t = k * s.period
        assert evaluate(s, t - 1e-18) == pytest.approx(evaluate(s, t + 1e-18), abs=1e-6)


def test_vectorised_and_validation():
    s = WindowedSine(m=0, n=2)
    v = s(np.linspace(0, 3 * s.period, 7))
    assert v.shape == (7,)
    assert v[-1] == 0.0
    with pytest.raises(ValueError):
        WindowedSine(f0=0.0)


def test_soft_source_split():
    a, b = inject_soft_source(1.0, 2.0, 0.5, 1e-12)
    inc = injection_gain(1e-12) * 0.5
    assert a == pytest.approx(1.0 + inc / 2) and b == pytest.approx(2.0 + inc / 2)
    assert injection_gain(1e-12) == pytest.approx(1e-12 / EPS0)
