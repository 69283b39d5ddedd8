"""Rescaled 2-D operators on the rectangle (0, x_max) x (-1, 1) and their spectra.

Both operators are five-point conservative stencils written as ``K u = lambda W u``
with K symmetric and W a positive diagonal, so they are self-adjoint in
``<u, v> = hx hy sum(W u v)``.  Eigenpairs come from shift-invert Lanczos on
``W^-1/2 K W^-1/2`` with a Sylvester-inertia check for missed eigenvalues.

The cross-sectional stencil carries the scalar factor ``kappa`` that makes its
first discrete Dirichlet eigenvalue exactly ``(pi/2)^2``.  Without it the
O(hy^2) error of that eigenvalue is multiplied by ``delta^(2/3) eps^-2`` and
dominates every comparison with the model ODE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .errors import ConfigError, NumericError
from .geometry import DomainParams, FermiMetric
from .sturm_liouville import Grid1D, Spectrum, fix_signs

Array = np.ndarray

TAG_DELTA = "L2_xy: jac(eps y, t0 - d3 x) / jac0(t0)"
TAG_DELTA0 = "L2_0,xy: jac0(t0 - d3 x) / jac0(t0)"


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; axis 0 is x (rescaled depth below the top), axis 1 is y."""

    x: Grid1D
    n_y_intervals: int = 60

    def __post_init__(self):
        if self.n_y_intervals < 4 or self.n_y_intervals % 2:
            raise ConfigError("n_y_intervals must be even and >= 4 so that y = 0 is a node")

    @classmethod
    def reference(cls, x_max: float, n_min: int = 1200, per_unit: float = 30.0,
                  n_y_intervals: int = 60) -> "Grid2D":
        # Grid1D insists on >= 200 nodes, which the 2-D minimum exceeds
        return cls(Grid1D(int(max(n_min, np.ceil(per_unit * x_max))), x_max), n_y_intervals)

    @property
    def hx(self) -> float:
        return self.x.h

    @property
    def hy(self) -> float:
        return 2.0 / self.n_y_intervals

    @property
    def y_nodes(self) -> Array:
        y = np.linspace(-1.0, 1.0, self.n_y_intervals + 1)
        y[self.n_y_intervals // 2] = 0.0
        return y

    @property
    def y_half(self) -> Array:
        return -1.0 + (np.arange(self.n_y_intervals) + 0.5) * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.n_nodes, self.n_y_intervals + 1

    @property
    def interior_shape(self) -> tuple[int, int]:
        return self.x.n_intervals - 1, self.n_y_intervals - 1

    @property
    def kappa(self) -> float:
        """Mode-matching factor for the y stencil."""
        h = self.hy
        return (np.pi / 2.0) ** 2 / ((4.0 / h ** 2) * np.sin(np.pi * h / 4.0) ** 2)

    def s_rows(self) -> int:
        """Metric s-grid size holding every y node and y half node."""
        return 2 * self.n_y_intervals + 1


@dataclass(frozen=True, eq=False)
class WeightedOperator2D:
    """``L u = W^-1 (K u)`` with five-point conservative K.

    x_faces[i, j]: flux coefficient between x nodes i and i+1 at interior y node j+1.
    y_faces[i, j]: flux coefficient between y nodes j and j+1 at interior x node i+1.
    weight, potential: interior node arrays.  ``h1``/``h2`` are the physical steps.
    """

    grid: Grid2D
    x_faces: Array
    y_faces: Array
    weight: Array
    potential: Array
    h1: float
    h2: float
    tag: str

    def __post_init__(self):
        nx, ny = self.grid.x.n_intervals, self.grid.n_y_intervals
        if (self.x_faces.shape != (nx, ny - 1) or self.y_faces.shape != (nx - 1, ny)
                or self.weight.shape != (nx - 1, ny - 1) or self.potential.shape != (nx - 1, ny - 1)):
            raise ConfigError("operator arrays do not match the grid")
        if np.any(self.weight <= 0):
            raise ConfigError("weights must be strictly positive")

    @property
    def cell(self) -> float:
        return self.h1 * self.h2

    @cached_property
    def stiffness(self) -> sp.csc_matrix:
        n1, m = self.weight.shape
        ax = self.x_faces / self.h1 ** 2
        ay = self.y_faces / self.h2 ** 2
        diag = (ax[:-1] + ax[1:] + ay[:, :-1] + ay[:, 1:] + self.potential * self.weight).ravel()
        off_x = -ax[1:-1].ravel()
        off_y = np.zeros((n1, m))
        off_y[:, :-1] = -ay[:, 1:-1]
        off_y = off_y.ravel()[:-1]
        K = sp.diags([off_x, off_y, diag, off_y, off_x], [-m, -1, 0, 1, m], format="csc")
        return K

    @cached_property
    def symmetric(self) -> sp.csc_matrix:
        r = sp.diags(1.0 / np.sqrt(self.weight.ravel()))
        return (r @ self.stiffness @ r).tocsc()

    def interior(self, u: Array) -> Array:
        return u[1:-1, 1:-1]

    def embed(self, u_int: Array) -> Array:
        out = np.zeros(self.grid.shape)
        out[1:-1, 1:-1] = u_int.reshape(self.weight.shape)
        return out

    def apply(self, u: Array) -> Array:
        """``L u`` on the full node array (zero on the boundary)."""
        Ku = self.stiffness @ self.interior(u).ravel()
        return self.embed(Ku / self.weight.ravel())

    def inner(self, u: Array, v: Array) -> float:
        return float(self.cell * np.sum(self.weight * self.interior(u) * self.interior(v)))

    def norm(self, u: Array) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def full_weight(self) -> Array:
        w = np.zeros(self.grid.shape)
        w[1:-1, 1:-1] = self.weight
        return w

    def rayleigh(self, u: Array) -> float:
        ui = self.interior(u).ravel()
        return float(ui @ (self.stiffness @ ui) / np.sum(self.weight.ravel() * ui * ui))


# ----------------------------------------------------------------------------
# coefficient sampling


@dataclass(frozen=True, eq=False)
class WarpSamples:
    """J and J_0 at the three staggered point sets of a Grid2D."""

    t_node: Array      # (nx+1,)
    t_half: Array      # (nx,)
    J_xhalf: Array     # (nx, ny-1)   J(eps y_j, t_{i+1/2}), interior j
    J_yhalf: Array     # (nx-1, ny)   J(eps y_{j+1/2}, t_i), interior i
    J_node: Array      # (nx-1, ny-1)
    J0_xhalf: Array    # (nx,)
    J0_node: Array     # (nx-1,)
    J0_top: float


def sample_warp(metric: FermiMetric, params: DomainParams, grid: Grid2D) -> WarpSamples:
    if abs(grid.x.x_max - params.x_max) > 1e-12 * params.x_max:
        raise ConfigError("grid x_max does not match the domain parameters")
    d3, eps = params.d3, params.eps
    t_node = params.t0 - d3 * grid.x.nodes
    t_node[-1] = -params.tau0
    t_half = params.t0 - d3 * grid.x.half_nodes
    y, yh = grid.y_nodes, grid.y_half
    r_node = metric.rows_for(eps * y[1:-1])
    r_half = metric.rows_for(eps * yh)
    J_xhalf = metric.warp(t_half, r_node).T
    J_yhalf = metric.warp(t_node[1:-1], r_half).T
    J_node = metric.warp(t_node[1:-1], r_node).T
    J0_xhalf = np.asarray(metric.jac0(t_half))
    J0_node = np.asarray(metric.jac0(t_node[1:-1]))
    J0_top = float(metric.jac0(params.t0))
    return WarpSamples(t_node, t_half, J_xhalf, J_yhalf, J_node, J0_xhalf, J0_node, J0_top)


def _check_metric(metric: FermiMetric, params: DomainParams, grid: Grid2D):
    if metric.s_grid.size < grid.s_rows():
        raise ConfigError("metric s grid is coarser than the 2-D y grid")


def assemble_delta0(metric: FermiMetric, params: DomainParams, grid: Grid2D,
                    samples: WarpSamples | None = None) -> WeightedOperator2D:
    """Discrete ``-Delta~_0`` with weight ``jac0 / jac0(t0)``."""
    ws = samples or sample_warp(metric, params, grid)
    ny = grid.n_y_intervals
    w_half = ws.J0_xhalf / ws.J0_top
    w_node = ws.J0_node / ws.J0_top
    g_ss = 1.0 / ws.J0_node ** 2
    c = params.y_scale * grid.kappa
    x_faces = np.repeat(w_half[:, None], ny - 1, axis=1)
    y_faces = np.repeat((c * w_node * g_ss)[:, None], ny, axis=1)
    weight = np.repeat(w_node[:, None], ny - 1, axis=1)
    return WeightedOperator2D(grid, x_faces, y_faces, weight, np.zeros_like(weight),
                              grid.hx, grid.hy, TAG_DELTA0)


def assemble_delta(metric: FermiMetric, params: DomainParams, grid: Grid2D,
                   samples: WarpSamples | None = None) -> WeightedOperator2D:
    """Discrete ``-Delta~`` with weight ``jac / jac0(t0)`` and ``g^ss = J^-2``."""
    ws = samples or sample_warp(metric, params, grid)
    c = params.y_scale * grid.kappa
    x_faces = ws.J_xhalf / ws.J0_top
    y_faces = c * (ws.J_yhalf / ws.J0_top) * (1.0 / ws.J_yhalf ** 2)
    weight = ws.J_node / ws.J0_top
    return WeightedOperator2D(grid, x_faces, y_faces, weight, np.zeros_like(weight),
                              grid.hx, grid.hy, TAG_DELTA)


# ----------------------------------------------------------------------------
# eigensolver


def _factor(S: sp.csc_matrix, sigma: float):
    n = S.shape[0]
    A = (S - sigma * sp.identity(n, format="csc")).tocsc()
    try:
        lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise NumericError(f"factorization at shift {sigma} failed: {exc}") from exc
    return lu


def count_below(S: sp.csc_matrix, sigma: float, lu=None) -> int:
    """Number of eigenvalues of symmetric S below sigma (Sylvester inertia of S - sigma I)."""
    lu = lu or _factor(S, sigma)
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise NumericError("factorization pivoted off the diagonal; inertia unavailable")
    d = lu.U.diagonal()
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise NumericError("singular or non-finite pivot in inertia count")
    return int(np.count_nonzero(d < 0))


def solve_eigen(op: WeightedOperator2D, k_max: int = 3, guesses=None, shift: float | None = None,
                tol: float = 1e-13) -> Spectrum:
    """Lowest ``k_max`` eigenpairs of ``K u = lambda W u``.

    The shift sits below the Rayleigh quotient of the first guess by half the
    spread of the guesses' quotients.  One extra pair is computed so that the
    inertia at the midpoint ``(lambda_k + lambda_{k+1}) / 2`` can confirm that
    exactly ``k_max`` eigenvalues lie below it.
    """
    if not 1 <= k_max <= 6:
        raise ConfigError("k_max must be in 1..6")
    S = op.symmetric
    n = S.shape[0]
    sqw = np.sqrt(op.weight.ravel())
    guesses = [] if guesses is None else list(guesses)

    if shift is None:
        if guesses:
            rq = sorted(op.rayleigh(g) for g in guesses)
            spread = rq[-1] - rq[0] if len(rq) > 1 else abs(rq[0])
            shift = rq[0] - max(0.5 * spread, 1e-3 * abs(rq[0]), 1e-8)
        else:
            shift = 0.0
    lu = None
    for _ in range(12):
        lu = _factor(S, shift)
        below = count_below(S, shift, lu)
        if below == 0:
            break
        # step down past the eigenvalues we overshot
        shift -= max(1.0, abs(shift)) * 0.5
    else:
        raise NumericError("could not place the shift below the spectrum")

    if guesses:
        v0 = np.sum([op.interior(g).ravel() * sqw for g in guesses], axis=0)
    else:
        v0 = np.ones(n)
    v0 = v0 + 1e-3 * np.linalg.norm(v0) / np.sqrt(n) * np.cos(np.arange(n) * 0.7071)
    opinv = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    k_eig = min(k_max + 1, n - 1)
    try:
        lam, z = eigsh(S, k=k_eig, sigma=shift, which="LM", OPinv=opinv, v0=v0, tol=tol,
                       ncv=min(n, max(4 * k_eig, 20)))
    except Exception as exc:  # ARPACK convergence failures
        raise NumericError(f"Lanczos failed: {exc}") from exc
    order = np.argsort(lam)
    lam, z = lam[order], z[:, order]
    mid = 0.5 * (lam[k_max - 1] + lam[k_max])
    n_mid = count_below(S, mid)
    if n_mid != k_max:
        raise NumericError(f"inertia mismatch: {n_mid} eigenvalues below {mid}, expected {k_max}")
    resid = np.linalg.norm(S @ z - z * lam, axis=0) / np.maximum(1.0, np.abs(lam))

    U = np.zeros((k_max,) + op.grid.shape)
    for k in range(k_max):
        U[k, 1:-1, 1:-1] = (z[:, k] / sqw / np.sqrt(op.cell)).reshape(op.weight.shape)
    U = fix_signs(U, lambda u: u[1].sum())
    diag = {"shift": float(shift), "inertia_at_shift": 0, "inertia_at_mid": n_mid,
            "mid": float(mid), "next_eigenvalue": float(lam[k_max]), "rel_residuals": resid[:k_max].tolist()}
    return Spectrum(lam[:k_max].copy(), U, op.full_weight(), op.cell, op.tag, op.grid, diag)


# ----------------------------------------------------------------------------
# separation of variables


def cross_profile(grid: Grid2D) -> Array:
    return np.cos(0.5 * np.pi * grid.y_nodes)


def guess_eigenfunction(k: int, model_spectrum: Spectrum, grid: Grid2D,
                        op0: WeightedOperator2D | None = None) -> Array:
    """``h_k(x) cos(pi y / 2)``, normalized in the Delta~_0 inner product when given."""
    mg = model_spectrum.grid
    if mg.n_intervals != grid.x.n_intervals or abs(mg.x_max - grid.x.x_max) > 1e-12 * grid.x.x_max:
        raise ConfigError("model ODE must be solved on the 2-D x grid")
    u = np.outer(model_spectrum.vector(k), cross_profile(grid))
    u[:, 0] = u[:, -1] = 0.0
    if op0 is not None:
        u = u / op0.norm(u)
    return u


def residual_norm(op0: WeightedOperator2D, guess: Array, lam: float) -> float:
    """Weighted norm of ``(L - lam) u``."""
    return op0.norm(op0.apply(guess) - lam * guess)


def project_slices(u: Array, grid: Grid2D) -> Array:
    """``h(x_i) = sum_j u(x_i, y_j) cos(pi y_j / 2) hy``."""
    return u @ cross_profile(grid) * grid.hy


def normal_part_mass(u: Array, op0: WeightedOperator2D) -> float:
    """Squared weighted norm of u minus its projection onto the first cross mode."""
    h = project_slices(u, op0.grid)
    return op0.inner(u - np.outer(h, cross_profile(op0.grid)), u - np.outer(h, cross_profile(op0.grid)))


def slice_gram(us, op0: WeightedOperator2D) -> Array:
    """Gram matrix of projected slices in the model-ODE inner product."""
    hs = [project_slices(u, op0.grid) for u in us]
    w = op0.weight[:, 0]
    hx = op0.grid.hx
    return np.array([[hx * np.sum(w * a[1:-1] * b[1:-1]) for b in hs] for a in hs])


@dataclass(frozen=True)
class DecayReport:
    slope: float
    x_star: float
    x_end: float
    n_points: int
    envelope_violations: int
    applicable: bool
    passed: bool


def slice_energy(u: Array, grid: Grid2D) -> Array:
    return 0.5 * np.sum(u ** 2, axis=1) * grid.hy


def slice_energy_decay(u: Array, grid: Grid2D, a_k: float, noise_floor: float = 1e-36,
                       end_margin: float = 2.0, max_slope: float = -1.0) -> DecayReport:
    """Fit ``log e(x)`` on ``[a_k + 10, x_end]``.

    ``x_end`` is the smaller of ``x_max - end_margin`` and the last node where
    ``e`` is above ``noise_floor * max(e)``; below that the values are
    eigensolver roundoff, not the function.  Envelope violations count nodes
    in the window with ``e(x) > e(x*) exp(-(x - x*))``.
    """
    x = grid.x.nodes
    e = slice_energy(u, grid)
    x_star = a_k + 10.0
    emax = float(e.max()) if e.size else 0.0
    above = np.flatnonzero(e > noise_floor * emax) if emax > 0 else np.array([], dtype=int)
    x_noise = x[above[-1]] if above.size else -np.inf
    x_end = min(grid.x.x_max - end_margin, x_noise)
    win = (x >= x_star) & (x <= x_end)
    n = int(np.count_nonzero(win))
    if n < 3:
        return DecayReport(float("nan"), x_star, float(x_end), n, 0, False, True)
    xs, es = x[win], e[win]
    slope = float(np.polyfit(xs, np.log(es), 1)[0])
    env = es[0] * np.exp(-(xs - xs[0]))
    viol = int(np.count_nonzero(es > env * (1 + 1e-9)))
    return DecayReport(slope, x_star, float(x_end), n, viol, True, slope <= max_slope and viol == 0)


def align(u: Array, ref: Array, inner) -> Array:
    return u if inner(u, ref) >= 0 else -u


def compare_spectra(spec: Spectrum, spec0: Spectrum, model: Spectrum, op0: WeightedOperator2D,
                    guesses, ks=(1, 2)) -> dict:
    """Deviation families for each k: ODE vs Delta~_0, Delta~_0 vs Delta~."""
    out = {}
    for k in ks:
        u0 = spec0.vector(k)
        g = align(guesses[k - 1], u0, op0.inner)
        u = align(spec.vector(k), u0, op0.inner)
        out[k] = {
            "lambda_ode": float(model.eigenvalues[k - 1]),
            "lambda_tilde0": float(spec0.eigenvalues[k - 1]),
            "lambda_tilde": float(spec.eigenvalues[k - 1]),
            "ode_vs_delta0": abs(float(spec0.eigenvalues[k - 1] - model.eigenvalues[k - 1])),
            "guess_distance": op0.norm(u0 - g),
            "delta_vs_delta0": abs(float(spec.eigenvalues[k - 1] - spec0.eigenvalues[k - 1])),
            "eigvec_distance": op0.norm(u - u0),
        }
    return out


def coefficient_difference(op: WeightedOperator2D, op0: WeightedOperator2D) -> float:
    """Max-norm difference of the face and weight arrays."""
    return float(max(np.max(np.abs(op.x_faces - op0.x_faces)), np.max(np.abs(op.y_faces - op0.y_faces)),
                     np.max(np.abs(op.weight - op0.weight))))


def symmetry_defect(op: WeightedOperator2D, rng: np.random.Generator, trials: int = 4) -> float:
    """Relative ``|<Lu, v> - <u, Lv>|`` over random interior vectors."""
    worst = 0.0
    for _ in range(trials):
        u, v = (op.embed(rng.standard_normal(op.weight.size)) for _ in range(2))
        Lu, Lv = op.apply(u), op.apply(v)
        a, b = op.inner(Lu, v), op.inner(u, Lv)
        worst = max(worst, abs(a - b) / (op.norm(Lu) * op.norm(v)))
    return worst
