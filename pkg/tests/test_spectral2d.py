import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplab.airy import airy_zeros
from gaplab.errors import ConfigError
from gaplab.spectral2d import (Grid2D, WeightedOperator2D, coefficient_difference, compare_spectra,
                               count_below, guess_eigenfunction, normal_part_mass, project_slices,
                               residual_norm, slice_energy_decay, slice_gram, solve_eigen, symmetry_defect)
from gaplab.sturm_liouville import Grid1D
from gaplab.tolerances import tol

from conftest import Setup


def frozen_operator(a=1.3, b=0.7, w=1.1, nx=240, ny=40, L=6.0):
    grid = Grid2D(Grid1D(nx, L), ny)
    return WeightedOperator2D(grid, np.full((nx, ny - 1), a), np.full((nx - 1, ny), b), np.full((nx - 1, ny - 1), w),
                              np.zeros((nx - 1, ny - 1)), grid.hx, grid.hy, "frozen")


def tensor_levels(op, a, b, w, n=8):
    g = op.grid
    lx = 4 / g.hx ** 2 * np.sin(np.arange(1, n + 1) * np.pi * g.hx / (2 * g.x.x_max)) ** 2
    ly = 4 / g.hy ** 2 * np.sin(np.arange(1, n + 1) * np.pi * g.hy / 4) ** 2
    return np.sort((a * lx[:, None] + b * ly[None, :]).ravel() / w)


@pytest.fixture(scope="module")
def g1_small_eps():
    return Setup("G1", 0.005)


# ---------------------------------------------------------------- grids and operators

def test_grid2d_geometry():
    g = Grid2D.reference(10.0)
    assert g.x.n_intervals == 1200 and g.n_y_intervals == 60
    assert g.y_nodes[0] == -1.0 and g.y_nodes[-1] == 1.0
    assert g.s_rows() == 121
    # mode matching: kappa times the discrete first y level is (pi/2)^2
    ly = 4 / g.hy ** 2 * np.sin(np.pi * g.hy / 4) ** 2
    assert g.kappa * ly == pytest.approx((np.pi / 2) ** 2, rel=1e-14)


def test_operator_shape_validation():
    grid = Grid2D(Grid1D(240, 6.0), 40)
    with pytest.raises(ConfigError):
        WeightedOperator2D(grid, np.ones((3, 3)), np.ones((239, 40)), np.ones((239, 39)), np.zeros((239, 39)),
                           grid.hx, grid.hy, "bad")
    with pytest.raises(ConfigError):
        WeightedOperator2D(grid, np.ones((240, 39)), np.ones((239, 40)), -np.ones((239, 39)),
                           np.zeros((239, 39)), grid.hx, grid.hy, "bad")


def test_frozen_tensor_oracle():
    a, b, w = 1.3, 0.7, 1.1
    op = frozen_operator(a, b, w)
    spec = solve_eigen(op, 4)
    exact = tensor_levels(op, a, b, w)[:4]
    assert np.allclose(spec.eigenvalues, exact, rtol=1e-8, atol=0)
    assert np.max(np.abs(spec.gram() - np.eye(4))) < 1e-8


def test_inertia_count():
    a, b, w = 1.3, 0.7, 1.1
    op = frozen_operator(a, b, w)
    lev = tensor_levels(op, a, b, w)
    for sigma in (0.5 * (lev[0] + lev[1]), 0.5 * (lev[4] + lev[5])):
        assert count_below(op.symmetric, sigma) == int(np.count_nonzero(lev < sigma))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.5, 2.0))
def test_frozen_tensor_property(a, b, w):
    op = frozen_operator(a, b, w, nx=200, ny=20, L=4.0)
    spec = solve_eigen(op, 2)
    assert np.allclose(spec.eigenvalues, tensor_levels(op, a, b, w)[:2], rtol=1e-8, atol=0)


def test_g1_coefficients_identical(g1_setup):
    assert coefficient_difference(g1_setup.op, g1_setup.op0) <= tol("pde", "coefficient_identity_abs")


def test_g3_coefficient_difference_order_eps(g3_setup):
    d = coefficient_difference(g3_setup.op, g3_setup.op0)
    assert 0 < d <= 0.05 * g3_setup.params.eps


@pytest.mark.parametrize("which", ["op", "op0"])
def test_weighted_symmetry(g3_setup, which, rng):
    assert symmetry_defect(getattr(g3_setup, which), rng) <= tol("pde", "symmetry_rel")


def test_weights_positive(g3_setup):
    assert np.all(g3_setup.op.weight > 0) and np.all(g3_setup.op0.weight > 0)


# ---------------------------------------------------------------- eigensolves

def test_spectrum_invariants(g3_setup):
    for spec in (g3_setup.spec, g3_setup.spec0):
        assert np.all(np.diff(spec.eigenvalues) > 0)
        assert np.max(np.abs(spec.gram() - np.eye(3))) < 1e-8
        v = spec.vector(1)
        assert np.all(v[0] == 0) and np.all(v[-1] == 0) and np.all(v[:, 0] == 0) and np.all(v[:, -1] == 0)
        assert spec.diagnostics["inertia_at_mid"] == 3


def test_simplicity(g3_setup):
    lam = g3_setup.spec.eigenvalues
    assert lam[1] - lam[0] >= tol("pde", "simplicity_gap")
    assert lam[2] - lam[1] >= tol("pde", "simplicity_gap")


def test_g1_pde_gap_calibrated_band(g1_setup):
    lam = g1_setup.spec.eigenvalues
    z = airy_zeros()
    band = tol("pde", "gap_band_calibrated_C") * g1_setup.params.delta ** (1 / 6)
    assert abs(lam[1] - lam[0] - (z[1] - z[0])) <= band


# ---------------------------------------------------------------- separation of variables

def test_guess_norm_and_trace(g3_setup):
    for k, g in enumerate(g3_setup.guesses, start=1):
        assert g3_setup.op0.norm(g) == pytest.approx(1.0, abs=1e-10)
        assert np.all(g[0] == 0) and np.all(g[-1] == 0) and np.all(g[:, 0] == 0) and np.all(g[:, -1] == 0)


def test_guess_requires_matching_grid(g3_setup):
    from gaplab.sturm_liouville import assemble_model_ode, solve_model_ode
    other = solve_model_ode(assemble_model_ode(g3_setup.metric, g3_setup.params), 2)
    with pytest.raises(ConfigError):
        guess_eigenfunction(1, other, g3_setup.grid)


def test_residual_examples(g1_setup):
    s = g1_setup
    for k in (1, 2):
        lam = s.model.eigenvalues[k - 1]
        assert residual_norm(s.op0, s.guesses[k - 1], lam) <= 1e-4
        assert residual_norm(s.op0, s.guesses[k - 1], lam + 1.0) >= 0.9


def test_project_slices_recovers_model(g3_setup):
    s = g3_setup
    for k in (1, 2):
        assert np.max(np.abs(project_slices(s.guesses[k - 1], s.grid) - s.model.vector(k))) < 1e-8


def test_slice_gram_and_normal_part(g3_setup):
    s = g3_setup
    G = slice_gram([s.spec0.vector(1), s.spec0.vector(2)], s.op0)
    assert np.max(np.abs(G - np.eye(2))) <= tol("pde", "slice_gram_C") * s.params.d3
    for k in (1, 2):
        assert normal_part_mass(s.spec0.vector(k), s.op0) <= tol("pde", "normal_mass_C") * s.params.d3


def test_compare_spectra_g1(g1_setup):
    s = g1_setup
    c = compare_spectra(s.spec, s.spec0, s.model, s.op0, s.guesses)
    for k in (1, 2):
        assert c[k]["delta_vs_delta0"] <= 1e-10 * c[k]["lambda_tilde"]
        assert c[k]["ode_vs_delta0"] <= 1e-9 * c[k]["lambda_tilde"]
        assert c[k]["guess_distance"] < 1e-8


def test_separation_against_reference_model(g1_setup):
    from gaplab.sturm_liouville import assemble_model_ode, solve_model_ode
    s = g1_setup
    ref = solve_model_ode(assemble_model_ode(s.metric, s.params), 2)
    assert np.max(np.abs(s.spec.eigenvalues[:2] - ref.eigenvalues)) <= tol("pde", "separation_abs")


def test_sign_invariance_of_distances(g3_setup):
    s = g3_setup
    flipped = type(s.spec)(s.spec.eigenvalues, -s.spec.eigenvectors, s.spec.weight, s.spec.cell,
                           s.spec.inner_product_tag, s.spec.grid, s.spec.diagnostics)
    a = compare_spectra(s.spec, s.spec0, s.model, s.op0, s.guesses)
    b = compare_spectra(flipped, s.spec0, s.model, s.op0, [-g for g in s.guesses])
    assert a == b


def test_g3_delta_vs_delta0_rate():
    eps_list = (0.2, 0.1, 0.05)
    devs, deltas = [], []
    for eps in eps_list:
        s = Setup("G3", eps, k_max=2)
        devs.append(abs(s.spec.eigenvalues[0] - s.spec0.eigenvalues[0]))
        deltas.append(s.params.delta)
    slope = np.polyfit(np.log(deltas), np.log(devs), 1)[0]
    assert slope >= tol("pde", "delta_vs_delta0_slope_min")


# ---------------------------------------------------------------- decay

@pytest.mark.parametrize("k", [1, 2])
def test_decay_of_eigenfunctions(g1_small_eps, k):
    s = g1_small_eps
    rep = slice_energy_decay(s.spec.vector(k), s.grid, airy_zeros()[k - 1])
    assert rep.applicable and rep.passed
    assert rep.slope <= -1.0
    assert rep.x_star == pytest.approx(airy_zeros()[k - 1] + 10)


def test_decay_flags_constant_function(g1_small_eps):
    s = g1_small_eps
    u = np.zeros(s.grid.shape)
    u[1:-1, 1:-1] = 1.0
    rep = slice_energy_decay(u, s.grid, airy_zeros()[0])
    assert rep.applicable and not rep.passed
    assert rep.envelope_violations > 0


def test_decay_not_applicable_on_short_domain(g1_setup):
    rep = slice_energy_decay(g1_setup.spec.vector(1), g1_setup.grid, airy_zeros()[0])
    assert not rep.applicable and rep.passed
