import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lhmesh.lattice import build_staggered_lattice
from lhmesh.rbf import (
    IllConditionedStencil, RbfKernel, build_shape_functions, build_stencils,
    evaluate_shape_functions, gaussian, interpolate,
)
from oracles import central_difference, gauss_solve, rbf_shape_oracle

D = 5e-4
NODES6 = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [2, 0], [2, 1]], float) * D
POINT6 = np.array([0.4, 0.3]) * D

# frozen from the Gaussian-elimination oracle (alpha_c = 0.5, d = 0.5 mm)
PHI6 = np.array([0.463029442709328, 0.4187565678796, 0.195176842698117,
                 0.176514876245457, -0.104970013628657, -0.0442471124906])
DPHI6_D = np.array([
    [-0.865559257564084, 0.996755551210614, -0.364851794458213,
     0.420153846564863, -0.148729447531795, -0.062692652578713],
    [-0.595656754961074, -0.53870262953966, 0.694496961784512,
     0.628092162817949, 0.135036980198075, -0.157444319559924],
])


def test_elimination_oracle_on_known_system():
    a = np.array([[2.0, 1, 1], [4, -6, 0], [-2, 7, 2]])
    assert np.allclose(gauss_solve(a, [5.0, -2, 9]), [1, 1, 2])
    # needs a row swap at the first pivot
    assert np.allclose(gauss_solve([[0.0, 1], [1, 0]], [3.0, 4]), [4, 3])


def test_shape_functions_match_frozen_oracle_values():
    st_ = build_shape_functions(NODES6, POINT6, RbfKernel(0.5, D))
    assert np.allclose(st_.phi, PHI6, rtol=0, atol=1e-12)
    assert np.allclose(st_.dphi * D, DPHI6_D, rtol=0, atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), alpha_c=st.floats(0.3, 4.0), n=st.integers(3, 12))
def test_shape_functions_match_elimination_oracle(seed, alpha_c, n):
    rng = np.random.default_rng(seed)
    base = np.stack(np.meshgrid(np.arange(4), np.arange(4), indexing="ij"), -1).reshape(-1, 2)
    nodes = (base[rng.choice(16, n, replace=False)] + rng.uniform(-0.3, 0.3, (n, 2))) * D
    pt = nodes.mean(0) + rng.uniform(-0.5, 0.5, 2) * D
    k = RbfKernel(alpha_c, D)
    got = build_shape_functions(nodes, pt, k)
    phi, dphi = rbf_shape_oracle(nodes, pt, k.alpha)
    scale = max(1.0, got.condition * 1e-12)
    assert np.allclose(got.phi, phi, atol=1e-9 * scale)
    assert np.allclose(got.dphi * D, dphi * D, atol=1e-8 * scale)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_kronecker_delta_at_stencil_nodes(seed):
    rng = np.random.default_rng(seed)
    base = np.stack(np.meshgrid(np.arange(4), np.arange(3), indexing="ij"), -1).reshape(-1, 2)
    nodes = (base + rng.uniform(-0.3, 0.3, base.shape)) * D
    phi = evaluate_shape_functions(nodes[None], nodes[None], RbfKernel(0.5, D))[0]
    assert np.max(np.abs(phi - np.eye(len(nodes)))) < 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_analytic_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    base = np.stack(np.meshgrid(np.arange(4), np.arange(3), indexing="ij"), -1).reshape(-1, 2)
    nodes = (base + rng.uniform(-0.3, 0.3, base.shape)) * D
    pt = nodes.mean(0) + rng.uniform(-0.5, 0.5, 2) * D
    k = RbfKernel(0.5, D)
    exact = build_shape_functions(nodes, pt, k).dphi
    fd = central_difference(lambda x: build_shape_functions(nodes, x, k).phi, pt, 1e-4 * D)
    assert np.max(np.abs(exact - fd)) / np.max(np.abs(exact)) < 1e-5


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), sx=st.floats(-0.1, 0.1), sy=st.floats(-0.1, 0.1))
def test_translation_invariance(seed, sx, sy):
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(0, 3, (10, 2)) * D
    pt = np.array([1.5, 1.5]) * D
    k = RbfKernel(1.0, D)
    shift = np.array([sx, sy])
    a = build_shape_functions(nodes, pt, k)
    b = build_shape_functions(nodes + shift, pt + shift, k)
    assert np.allclose(a.phi, b.phi, atol=1e-8)
    assert np.allclose(a.dphi * D, b.dphi * D, atol=1e-7)


def test_conditioning_worsens_as_alpha_c_shrinks():
    e, h = build_staggered_lattice(0.005, 11)
    conds = []
    for ac in (4.0, 2.0, 1.0, 0.5, 0.25):
        s = build_stencils(e, h.positions[:5], RbfKernel(ac, e.d_min), 12)
        conds.append(s.condition.max())
    assert all(b > a for a, b in zip(conds, conds[1:]))


def test_default_scenario_conditioning():
    e, h = build_staggered_lattice(0.03, 61)
    s = build_stencils(e, h.positions, RbfKernel(0.5, e.d_min), 12)
    assert s.condition.max() < 200


def test_ill_conditioned_stencil_reports_nodes():
    e, h = build_staggered_lattice(0.005, 11)
    with pytest.raises(IllConditionedStencil) as exc:
        build_stencils(e, h.positions[:4], RbfKernel(1e-3, e.d_min), 12)
    assert exc.value.nodes == (0, 1, 2, 3)
    assert "alpha_c" in str(exc.value)


def test_duplicate_nodes_rejected():
    with pytest.raises(ValueError, match="distinct"):
        build_shape_functions(np.zeros((2, 2)), [0.0, 0.0], RbfKernel(1.0, D))


def test_interpolate_length_mismatch():
    s = build_shape_functions(NODES6, POINT6, RbfKernel(0.5, D))
    assert interpolate(s, np.ones(6)) == pytest.approx(PHI6.sum())
    with pytest.raises(ValueError, match="expected 6"):
        interpolate(s, np.ones(5))


def test_global_mode_matches_explicit_solve():
    e, h = build_staggered_lattice(0.002, 4)
    k = RbfKernel(1.0, e.d_min)
    s = build_stencils(e, h.positions[:3], k, count=100)
    assert s.indices.shape == (3, e.size)
    one = build_shape_functions(e.positions, h.positions[1], k)
    assert np.allclose(s.phi[1], one.phi, atol=1e-10)


def test_sparse_operators_reproduce_stencil_rows():
    e, h = build_staggered_lattice(0.005, 11)
    s = build_stencils(e, h.positions, RbfKernel(0.5, e.d_min), 12)
    v = np.random.default_rng(1).standard_normal(e.size)
    i = 17
    assert s.interpolation_matrix()[i] @ v == pytest.approx(s.phi[i] @ v[s.indices[i]])
    assert s.derivative_matrix(1)[i] @ v == pytest.approx(s.dphi[i, 1] @ v[s.indices[i]])


def test_gaussian_kernel():
    k = RbfKernel(0.5, D)
    assert gaussian(0.0, k) == 1.0
    assert gaussian(D, k) == pytest.approx(np.exp(-0.5))
    with pytest.raises(ValueError):
        gaussian(-1.0, k)
    with pytest.raises(ValueError):
        RbfKernel(0.0, D)
