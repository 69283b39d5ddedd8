"""Runtime checkers for the two abstract perturbation estimates.

Both checks are finite-dimensional: the operators are the discrete ones, the
Hilbert spaces are node arrays with weighted inner products.  The universal
constants are fixed here (6 for the guessing estimate, whose proof gives
4 sqrt(2); 64 for the two-inner-product estimate) and are not claimed to be
sharp.  A relative roundoff floor is added to every inequality.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigh

C_GUESS = 6.0
C_TWO_NORM = 64.0
ROUNDOFF = 1e-10


def _floor(*scales) -> float:
    return ROUNDOFF * max([1.0] + [abs(float(s)) for s in scales])


@dataclass(frozen=True)
class GuessCertificate:
    epsilon_guess: float
    matched_index: int          # 1-based, 0 when unmatched
    eigenvalue_error: float
    eigenvector_error: float    # nan when the eigenvector bound is not asserted
    gap_Gamma_j: float
    eigvec_asserted: bool
    passed: bool
    reason: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def check_guess_lemma(spectrum, op, lambda_guess: float, v_guess, C: float = C_GUESS) -> GuessCertificate:
    """Check ``|lambda_j - lambda_guess| <= eps_guess`` and the eigenvector bound.

    ``op`` supplies ``apply``/``inner``/``norm`` for the operator whose computed
    spectrum is ``spectrum``.  Eigenvalues above the computed window are known
    only through ``spectrum.diagnostics['next_eigenvalue']`` when available.
    """
    nv = op.norm(v_guess)
    if not np.isfinite(nv) or nv == 0:
        return GuessCertificate(float("nan"), 0, float("nan"), float("nan"), float("nan"), False, False,
                                "guess has zero or non-finite norm")
    v = v_guess / nv
    eps_guess = op.norm(op.apply(v) - lambda_guess * v)
    lam = np.asarray(spectrum.eigenvalues, dtype=float)
    nxt = spectrum.diagnostics.get("next_eigenvalue") if spectrum.diagnostics else None
    j = int(np.argmin(np.abs(lam - lambda_guess)))
    err = abs(float(lam[j] - lambda_guess))
    floor = _floor(lambda_guess)
    upper_known = nxt is not None and np.isfinite(nxt)
    if j == lam.size - 1 and upper_known and abs(nxt - lambda_guess) < err:
        return GuessCertificate(eps_guess, 0, err, float("nan"), float("nan"), False, False,
                                "nearest eigenvalue lies outside the computed window")
    if err > eps_guess + floor:
        return GuessCertificate(eps_guess, j + 1, err, float("nan"), float("nan"), False, False,
                                "no computed eigenvalue within eps_guess")

    neighbours = []
    if j > 0:
        neighbours.append(lam[j] - lam[j - 1])
    if j + 1 < lam.size:
        neighbours.append(lam[j + 1] - lam[j])
    elif upper_known:
        neighbours.append(nxt - lam[j])
    gap = float(min(neighbours)) if neighbours else float("nan")

    assert_vec = bool(np.isfinite(gap) and gap > 0 and eps_guess <= 0.5 * gap)
    vec_err = float("nan")
    passed, reason = True, ""
    if assert_vec:
        vj = spectrum.vector(j + 1)
        if op.inner(vj, v) < 0:
            vj = -vj
        vec_err = op.norm(vj - v)
        if vec_err > C * eps_guess / gap + np.sqrt(floor):
            passed, reason = False, "eigenvector bound violated"
    return GuessCertificate(eps_guess, j + 1, err, vec_err, gap, assert_vec, passed, reason)


# ----------------------------------------------------------------------------
# two inner products


def measure_eps_comp(op, op0, rng: np.random.Generator, pairs: int = 256) -> dict:
    """Compatibility constant of the two weighted inner products.

    The analytic bound is ``max |W - W0| / min(W, W0)``; the sampled one is
    the worst ratio over random pairs for both normalizations.
    """
    W, W0 = op.weight, op0.weight
    analytic = float(np.max(np.abs(W - W0) / np.minimum(W, W0)))
    sampled = 0.0
    for _ in range(pairs):
        a, b = (op.embed(rng.standard_normal(W.size)) for _ in range(2))
        d = abs(op0.inner(a, b) - op.inner(a, b))
        sampled = max(sampled, d / (op0.norm(a) * op0.norm(b)), d / (op.norm(a) * op.norm(b)))
    return {"analytic": analytic, "sampled": float(sampled), "eps_comp": max(analytic, float(sampled))}


def _span_max(vectors, form_op, norm_op, other_op) -> float:
    """``max |<(L0 - L) v, v>| / |v|^2`` over span(vectors), inner products from norm_op.

    ``form_op`` is L0, ``other_op`` is L; the quadratic form uses the
    symmetric part, so the max is the largest |generalized eigenvalue|.
    """
    k = len(vectors)
    E = [form_op.apply(v) - other_op.apply(v) for v in vectors]
    A = np.array([[norm_op.inner(E[i], vectors[j]) for j in range(k)] for i in range(k)])
    G = np.array([[norm_op.inner(vectors[i], vectors[j]) for j in range(k)] for i in range(k)])
    vals = eigh(0.5 * (A + A.T), G, eigvals_only=True)
    return float(np.max(np.abs(vals)))


def form_difference_bounds(op, op0, spec, spec0, k: int) -> dict:
    """The two span maxima in the eigenvalue sandwich for index k."""
    Sk0 = [spec0.vector(i) for i in range(1, k + 1)]
    Sk = [spec.vector(i) for i in range(1, k + 1)]
    return {
        "on_S0_in_L": _span_max(Sk0, op0, op, op),      # v in S_k^o, norm of L
        "on_S_in_L0": _span_max(Sk, op0, op0, op),      # v in S_k, norm of L0
    }


@dataclass(frozen=True)
class TwoNormReport:
    k: int
    lower: float
    diff: float
    upper: float
    sandwich_ok: bool
    eigvec_sq: float
    eigvec_bound: float
    eigvec_ok: bool
    gamma0: float
    eps_comp: float
    applicable: bool
    passed: bool
    flags: tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return asdict(self)


def check_two_norm_perturbation(spec, spec0, op0, eps_comp: float, form_diff: dict, k: int,
                                C: float = C_TWO_NORM) -> TwoNormReport:
    """Eigenvalue sandwich and squared eigenvector bound for index k.

    ``spec``/``spec0`` are the spectra of L and L0; ``op0`` provides the L0
    inner product.  The lemma is only attempted for non-negative operators
    with ``eps_comp <= 1/2``; otherwise the report is flagged, not failed.
    """
    lam, lam0 = float(spec.eigenvalues[k - 1]), float(spec0.eigenvalues[k - 1])
    flags = []
    if lam0 < 0 or float(spec.eigenvalues[0]) < 0 or float(spec0.eigenvalues[0]) < 0:
        flags.append("negative_leading_eigenvalue")
    if eps_comp > 0.5:
        flags.append("eps_comp_above_half")
    m0, m = form_diff["on_S0_in_L"], form_diff["on_S_in_L0"]
    lower = -3.0 * eps_comp * lam - m
    upper = 3.0 * eps_comp * lam0 + m0
    diff = lam - lam0
    fl = _floor(lam, lam0)
    sandwich = lower - fl <= diff <= upper + fl

    ev0 = list(spec0.eigenvalues)
    nxt = spec0.diagnostics.get("next_eigenvalue") if spec0.diagnostics else None
    if k < len(ev0):
        above = ev0[k] - lam0
    elif nxt is not None:
        above = nxt - lam0
    else:
        above = float("nan")
    gaps = [above] + ([lam0 - ev0[k - 2]] if k >= 2 else [])
    gamma0 = float(min(gaps))
    v0 = spec0.vector(k)
    v = spec.vector(k)
    if op0.inner(v, v0) < 0:
        v = -v
    eigvec_sq = op0.norm(v - v0) ** 2
    if np.isfinite(gamma0) and gamma0 > 0:
        bound = C / gamma0 * (eps_comp * lam0 + m0 + m)
        vec_ok = eigvec_sq <= bound + np.sqrt(fl)
    else:
        bound, vec_ok = float("nan"), False
        flags.append("gamma0_unavailable")
    applicable = not flags or flags == ["gamma0_unavailable"]
    passed = bool(sandwich and vec_ok) if applicable else True
    return TwoNormReport(k, lower, diff, upper, bool(sandwich), eigvec_sq, bound, bool(vec_ok), gamma0,
                         eps_comp, applicable, passed, tuple(flags))
