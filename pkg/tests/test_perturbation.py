import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from gaplab.perturbation import (C_GUESS, C_TWO_NORM, check_guess_lemma, check_two_norm_perturbation,
                                 form_difference_bounds, measure_eps_comp)
from gaplab.spectral2d import residual_norm
from gaplab.sturm_liouville import Spectrum


class DenseOp:
    """Symmetric matrix in the Euclidean inner product."""

    def __init__(self, A):
        self.A = A

    def apply(self, v):
        return self.A @ v

    def inner(self, u, v):
        return float(u @ v)

    def norm(self, u):
        return float(np.sqrt(u @ u))


def dense_spectrum(A, k):
    lam, V = np.linalg.eigh(A)
    return Spectrum(lam[:k], V[:, :k].T.copy(), np.ones(A.shape[0]), 1.0, "euclid",
                    diagnostics={"next_eigenvalue": float(lam[k])})


def random_spd(rng, n, spread=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.sort(rng.uniform(1.0, spread, n))) @ Q.T


# ---------------------------------------------------------------- guessing lemma

def test_exact_eigenpair_certificate(g3_setup):
    s = g3_setup
    c = check_guess_lemma(s.spec0, s.op0, float(s.spec0.eigenvalues[0]), s.spec0.vector(1))
    assert c.passed and c.matched_index == 1
    assert c.epsilon_guess < 1e-9 and c.eigenvalue_error < 1e-12 and c.eigenvector_error < 1e-9


@pytest.mark.parametrize("k", [1, 2])
def test_guess_certificate_against_delta0(g3_setup, k):
    s = g3_setup
    lam = float(s.model.eigenvalues[k - 1])
    c = check_guess_lemma(s.spec0, s.op0, lam, s.guesses[k - 1], C_GUESS)
    assert c.passed and c.matched_index == k and c.eigvec_asserted
    assert c.epsilon_guess == pytest.approx(residual_norm(s.op0, s.guesses[k - 1], lam), rel=1e-12)
    assert c.eigenvalue_error <= c.epsilon_guess + 1e-10 * lam
    assert c.gap_Gamma_j > 0


def test_random_vector_reports_failure(g3_setup, rng):
    s = g3_setup
    v = s.op0.embed(rng.standard_normal(s.op0.weight.size))
    c = check_guess_lemma(s.spec0, s.op0, float(s.spec0.eigenvalues[0]), v)
    # a generic vector has an enormous residual, so either nothing is asserted or it fails
    assert c.epsilon_guess > 100
    assert not c.eigvec_asserted


def test_zero_guess_is_reported():
    A = np.diag([1.0, 2.0, 3.0, 4.0])
    c = check_guess_lemma(dense_spectrum(A, 2), DenseOp(A), 1.0, np.zeros(4))
    assert not c.passed and "norm" in c.reason


def test_unmatched_guess_fails():
    A = np.diag([1.0, 2.0, 3.0, 4.0, 50.0])
    spec = dense_spectrum(A, 2)
    v = np.array([1.0, 0, 0, 0, 0])
    c = check_guess_lemma(spec, DenseOp(A), 1.5, v)
    assert c.passed  # eps_guess = 0.5 covers |1 - 1.5|
    c = check_guess_lemma(spec, DenseOp(A), 3.9, np.array([0, 0, 0, 1.0, 0]))
    assert not c.passed and c.matched_index == 0


def test_certificates_are_pure(g3_setup):
    s = g3_setup
    a = check_guess_lemma(s.spec0, s.op0, float(s.model.eigenvalues[0]), s.guesses[0])
    b = check_guess_lemma(s.spec0, s.op0, float(s.model.eigenvalues[0]), s.guesses[0])
    assert a == b


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-6, 0.3))
@example(seed=156, size=0.25)
def test_guess_lemma_property(seed, size):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, 12)
    spec = dense_spectrum(A, 3)
    j = int(rng.integers(1, 4))
    v = spec.vector(j) + size * rng.standard_normal(12)
    lam_guess = float(v @ A @ v / (v @ v))
    c = check_guess_lemma(spec, DenseOp(A), lam_guess, v)
    # the residual bound holds against the full spectrum, whatever the window
    full = np.linalg.eigvalsh(A)
    assert np.min(np.abs(full - lam_guess)) <= c.epsilon_guess * (1 + 1e-12) + 1e-12
    if c.matched_index > 0:
        assert c.eigenvalue_error <= c.epsilon_guess * (1 + 1e-12) + 1e-12
    else:
        assert not c.passed
    if c.eigvec_asserted:
        assert c.passed


# ---------------------------------------------------------------- two inner products

def test_eps_comp_bounds(g3_setup, rng):
    s = g3_setup
    e = measure_eps_comp(s.op, s.op0, rng, pairs=64)
    assert e["sampled"] <= e["analytic"] * (1 + 1e-12)
    assert e["eps_comp"] == e["analytic"]
    assert 0 < e["eps_comp"] <= s.params.eps


def test_identical_spectra_zero_slack(g3_setup):
    s = g3_setup
    fd = form_difference_bounds(s.op0, s.op0, s.spec0, s.spec0, 2)
    assert fd["on_S0_in_L"] == 0.0 and fd["on_S_in_L0"] == 0.0
    rep = check_two_norm_perturbation(s.spec0, s.spec0, s.op0, 0.0, fd, 2)
    assert rep.passed and rep.diff == 0.0 and rep.lower == 0.0 and rep.upper == 0.0
    assert rep.eigvec_sq == 0.0


@pytest.mark.parametrize("k", [1, 2])
def test_sandwich_g3(g3_setup, k, rng):
    s = g3_setup
    e = measure_eps_comp(s.op, s.op0, rng, pairs=32)["eps_comp"]
    fd = form_difference_bounds(s.op, s.op0, s.spec, s.spec0, k)
    rep = check_two_norm_perturbation(s.spec, s.spec0, s.op0, e, fd, k, C_TWO_NORM)
    assert rep.applicable and rep.passed
    assert rep.lower <= rep.diff <= rep.upper


def test_sandwich_g1_collapses(g1_setup, rng):
    s = g1_setup
    e = measure_eps_comp(s.op, s.op0, rng, pairs=16)["eps_comp"]
    fd = form_difference_bounds(s.op, s.op0, s.spec, s.spec0, 2)
    rep = check_two_norm_perturbation(s.spec, s.spec0, s.op0, e, fd, 2)
    assert e == 0.0 and fd["on_S0_in_L"] == 0.0
    assert rep.passed and abs(rep.diff) < 1e-9 and rep.eigvec_sq < 1e-18


def test_not_attempted_flags():
    A = np.diag([-1.0, 2.0, 3.0, 4.0])
    spec = dense_spectrum(A, 2)
    fd = {"on_S0_in_L": 0.0, "on_S_in_L0": 0.0}
    rep = check_two_norm_perturbation(spec, spec, DenseOp(A), 0.0, fd, 1)
    assert not rep.applicable and "negative_leading_eigenvalue" in rep.flags
    B = np.diag([1.0, 2.0, 3.0, 4.0])
    rep = check_two_norm_perturbation(dense_spectrum(B, 2), dense_spectrum(B, 2), DenseOp(B), 0.7, fd, 1)
    assert not rep.applicable and "eps_comp_above_half" in rep.flags


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(1e-4, 0.5))
def test_two_norm_property_same_inner_product(seed, size):
    rng = np.random.default_rng(seed)
    A0 = random_spd(rng, 10)
    E = rng.standard_normal((10, 10))
    A = A0 + size * (E + E.T) / 2
    A = A + max(0.0, 0.5 - np.linalg.eigvalsh(A)[0]) * np.eye(10)
    spec0, spec = dense_spectrum(A0, 3), dense_spectrum(A, 3)
    for k in (1, 2):
        fd = form_difference_bounds(DenseOp(A), DenseOp(A0), spec, spec0, k)
        rep = check_two_norm_perturbation(spec, spec0, DenseOp(A0), 0.0, fd, k)
        assert rep.sandwich_ok
