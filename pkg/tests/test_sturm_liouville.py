import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplab.airy import airy_zeros, build_airy_basis
from gaplab.cross_section import make_params
from gaplab.errors import ConfigError
from gaplab.geometry import build_metric, builtin_profile
from gaplab.sturm_liouville import (Grid1D, assemble_model_ode, assemble_sturm_liouville, h1_norm,
                                    solve_model_ode, verify_airy_asymptotics)
from gaplab.tolerances import tol


@pytest.fixture(scope="module")
def g1_params(g1_metric):
    return make_params(g1_metric, 1.0, 0.05)


@pytest.fixture(scope="module")
def g1_model(g1_metric, g1_params):
    return solve_model_ode(assemble_model_ode(g1_metric, g1_params), 4)


def test_grid_invariants():
    g = Grid1D(1999, 7.5)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 7.5
    assert np.allclose(np.diff(g.nodes), g.h, rtol=0, atol=1e-14)
    assert g.n_nodes == 2000
    with pytest.raises(ConfigError):
        Grid1D(100, 1.0)
    assert Grid1D.reference(100.0).n_intervals == 4000
    assert Grid1D.reference(10.0).n_intervals == 2000


def test_constant_coefficient_oracle():
    x_max, c = 10.7, 3.25
    grid = Grid1D.reference(x_max)
    spec = solve_model_ode(assemble_sturm_liouville(grid, 1.0, 1.0, c), 4)
    k = np.arange(1, 5)
    # continuum levels for the two modes the experiments use
    assert np.max(np.abs(spec.eigenvalues[:2] - (c + (k[:2] * np.pi / x_max) ** 2))) < 1e-6
    # exact discrete levels for all of them
    discrete = c + 4 / grid.h ** 2 * np.sin(k * np.pi * grid.h / (2 * x_max)) ** 2
    assert np.max(np.abs(spec.eigenvalues - discrete)) < 1e-10


def test_model_weight_at_top(g1_metric, g1_params):
    prob = assemble_model_ode(g1_metric, g1_params)
    assert prob.weight[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(prob.weight > 0)


_METRICS = {}


def builtin_and_metric(name):
    if name not in _METRICS:
        _METRICS[name] = build_metric(builtin_profile(name), 1.0, 0.05, n_s=5)
    return _METRICS[name]


def test_stencil_symmetry_relative(rng):
    m = builtin_and_metric("G2")
    prob = assemble_model_ode(m, make_params(m, 1.0, 0.05))
    u, v = rng.standard_normal((2, prob.grid.n_nodes))
    u[[0, -1]] = v[[0, -1]] = 0.0
    Lu, Lv = prob.apply(u), prob.apply(v)
    scale = np.sqrt(prob.inner(Lu, Lu) * prob.inner(v, v))
    assert abs(prob.inner(Lu, v) - prob.inner(u, Lv)) <= 1e-12 * scale


def test_spectrum_invariants(g1_model):
    s = g1_model
    assert np.all(np.diff(s.eigenvalues) >= 0)
    assert np.max(np.abs(s.gram() - np.eye(s.k_max))) < 1e-8
    assert np.all(s.eigenvectors[:, 0] == 0) and np.all(s.eigenvectors[:, -1] == 0)
    assert np.all(s.eigenvectors[:, 1] > 0)


def test_eigenpair_residual(g1_metric, g1_params, g1_model):
    prob = assemble_model_ode(g1_metric, g1_params)
    for k in range(1, 5):
        u = g1_model.vector(k)
        r = prob.apply(u) - g1_model.eigenvalues[k - 1] * u
        assert np.sqrt(prob.inner(r, r)) < 1e-8 * g1_model.eigenvalues[k - 1]


def test_grid_convergence_second_order(g1_metric, g1_params):
    vals = [solve_model_ode(assemble_model_ode(g1_metric, g1_params, Grid1D(n, g1_params.x_max)), 1).eigenvalues[0]
            for n in (250, 500, 1000)]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    assert abs(d2) <= 0.3 * abs(d1)


def test_grid_mismatch(g1_metric, g1_params):
    with pytest.raises(ConfigError):
        assemble_model_ode(g1_metric, g1_params, Grid1D(400, 3.0))


def test_k_max_bounds(g1_metric, g1_params):
    with pytest.raises(ConfigError):
        solve_model_ode(assemble_model_ode(g1_metric, g1_params), 7)


def test_airy_asymptotics_calibrated_bands(g1_params, g1_model):
    rep = verify_airy_asymptotics(g1_model, build_airy_basis(4), g1_params)
    d3 = g1_params.d3
    z = airy_zeros()
    assert all(abs(o) <= tol("model_ode", "eigenvalue_C") * d3 for o in rep.offsets[:2])
    assert abs(rep.gap - (z[1] - z[0])) <= tol("model_ode", "gap_C") * d3
    assert abs(rep.key_deviation) <= tol("model_ode", "key_integral_C") * d3
    assert rep.checks["h1_bounded"] and rep.checks["tail_envelope"]
    # offsets are positive: the weight and potential only lift the levels
    assert all(o > 0 for o in rep.offsets)


@pytest.mark.xfail(strict=True, reason="0.5 d3 a_1 band is below the converged offset constant 1.40 d3")
def test_airy_asymptotics_half_constant_band(g1_params, g1_model):
    # first level and gap inside 0.5 d3 a_1 at eps = 0.05; measured 0.1398 vs 0.1363
    rep = verify_airy_asymptotics(g1_model, build_airy_basis(4), g1_params)
    d3 = g1_params.d3
    z = airy_zeros()
    assert abs(rep.offsets[0]) <= 0.5 * d3 * z[0]
    assert abs(rep.gap - (z[1] - z[0])) <= 0.5 * d3 * z[0]


def test_h1_norm_of_sine():
    x = np.linspace(0, np.pi, 20001)
    h = x[1] - x[0]
    # |sin|^2 + |cos|^2 = pi/2 + pi/2
    assert h1_norm(np.sin(x), h) == pytest.approx(np.sqrt(np.pi), rel=1e-6)


def test_offsets_shrink_with_eps():
    m = builtin_and_metric("G1")
    offs = []
    for eps in (0.02, 0.005, 0.001):
        p = make_params(m, 1.0, eps)
        s = solve_model_ode(assemble_model_ode(m, p), 2)
        offs.append(s.eigenvalues[0] - s.diagnostics["base"] - airy_zeros()[0])
    assert offs[0] > offs[1] > offs[2] > 0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(0.0, 5.0), st.floats(2.0, 20.0))
def test_scaled_constant_oracle(a, c, L):
    # -(a u')' = lambda a u + c: eigenvalues are c + (k pi / L)^2 independently of a
    grid = Grid1D(400, L)
    spec = solve_model_ode(assemble_sturm_liouville(grid, a, a, c), 2)
    h = grid.h
    exact = c + 4 / h ** 2 * np.sin(np.arange(1, 3) * np.pi * h / (2 * L)) ** 2
    assert np.allclose(spec.eigenvalues, exact, rtol=1e-10, atol=1e-10)
