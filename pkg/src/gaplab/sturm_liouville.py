"""The weighted model ODE in the rescaled vertical variable and its Airy limit.

Discretizes ``-(1/w)(a u')' + q u = lambda u`` on ``(0, x_max)`` with Dirichlet
ends, where ``a = w = jac_0(t0 - delta^(1/3) x) / jac_0(t0)`` and
``q = delta^(2/3) eps^-2 mu_1(t0 - delta^(1/3) x)``.  The three-point stencil is
conservative so the matrix is symmetric in the w-weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .airy import AiryEigenbasis, build_airy_basis
from .cross_section import mu1
from .errors import ConfigError, NumericError
from .geometry import DomainParams, FermiMetric

Array = np.ndarray

MODEL_TAG = "L2_x: jac0(t0 - d3 x) / jac0(t0)"


@dataclass(frozen=True)
class Grid1D:
    """Uniform nodes ``x_i = i h`` on ``[0, x_max]``."""

    n_intervals: int
    x_max: float

    def __post_init__(self):
        if self.n_intervals < 199:
            raise ConfigError("Grid1D needs at least 200 nodes")
        if not self.x_max > 0:
            raise ConfigError("x_max must be positive")

    @classmethod
    def reference(cls, x_max: float, n_min: int = 2000, per_unit: float = 40.0) -> "Grid1D":
        return cls(int(max(n_min, np.ceil(per_unit * x_max))), x_max)

    @property
    def n_nodes(self) -> int:
        return self.n_intervals + 1

    @property
    def h(self) -> float:
        return self.x_max / self.n_intervals

    @property
    def nodes(self) -> Array:
        return np.linspace(0.0, self.x_max, self.n_nodes)

    @property
    def half_nodes(self) -> Array:
        return (np.arange(self.n_intervals) + 0.5) * self.h


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Lowest eigenpairs, orthonormal in ``<u, v> = cell * sum(weight u v)``.

    ``eigenvectors[k]`` is a full node array (Dirichlet nodes included, zero).
    ``weight`` has the node-array shape; entries on Dirichlet nodes are unused.
    """

    eigenvalues: Array
    eigenvectors: Array
    weight: Array
    cell: float
    inner_product_tag: str
    grid: Any = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.eigenvalues) < 0):
            raise NumericError("eigenvalues not ascending")

    @property
    def k_max(self) -> int:
        return len(self.eigenvalues)

    def inner(self, u, v) -> float:
        return float(self.cell * np.sum(self.weight * u * v))

    def norm(self, u) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def gram(self) -> Array:
        V = self.eigenvectors.reshape(self.k_max, -1)
        return self.cell * (V * self.weight.ravel()) @ V.T

    def vector(self, k: int) -> Array:
        """k-th eigenvector, 1-based."""
        return self.eigenvectors[k - 1]


@dataclass(frozen=True, eq=False)
class ModelODEProblem:
    """Face coefficients a_{i+1/2}, node weights w_i and node potential q_i."""

    grid: Grid1D
    face_coef: Array
    weight: Array
    potential: Array
    base: float = 0.0
    tag: str = MODEL_TAG

    def __post_init__(self):
        n = self.grid.n_intervals
        if self.face_coef.shape != (n,) or self.weight.shape != (n + 1,) or self.potential.shape != (n + 1,):
            raise ConfigError("coefficient arrays do not match the grid")
        if np.any(self.weight <= 0) or np.any(self.face_coef <= 0):
            raise ConfigError("weights and face coefficients must be positive")

    def stiffness(self) -> tuple[Array, Array]:
        """Diagonal and off-diagonal of K on interior nodes (K u = lambda W u)."""
        a, h2 = self.face_coef, self.grid.h ** 2
        w = self.weight[1:-1]
        d = (a[:-1] + a[1:]) / h2 + self.potential[1:-1] * w
        e = -a[1:-1] / h2
        return d, e

    def symmetric(self) -> tuple[Array, Array]:
        """Tridiagonal ``W^-1/2 K W^-1/2``."""
        d, e = self.stiffness()
        r = 1.0 / np.sqrt(self.weight[1:-1])
        return d * r * r, e * r[:-1] * r[1:]

    def apply(self, u: Array) -> Array:
        """``L u`` at all nodes (zero on the Dirichlet nodes)."""
        flux = self.face_coef * np.diff(u) / self.grid.h
        out = np.zeros_like(u, dtype=float)
        out[1:-1] = -np.diff(flux) / self.grid.h / self.weight[1:-1] + self.potential[1:-1] * u[1:-1]
        return out

    def inner(self, u, v) -> float:
        return float(self.grid.h * np.sum(self.weight[1:-1] * u[1:-1] * v[1:-1]))


def assemble_sturm_liouville(grid: Grid1D, a, w, q, base: float = 0.0, tag: str = MODEL_TAG) -> ModelODEProblem:
    """Generic builder from callables (or arrays) for a, w, q of x."""
    def sample(f, x):
        return np.broadcast_to(np.asarray(f(x) if callable(f) else f, dtype=float), x.shape).copy()

    return ModelODEProblem(grid, sample(a, grid.half_nodes), sample(w, grid.nodes), sample(q, grid.nodes), base, tag)


def assemble_model_ode(metric: FermiMetric, params: DomainParams, grid: Grid1D | None = None) -> ModelODEProblem:
    d3 = params.d3
    if grid is None:
        grid = Grid1D.reference(params.x_max)
    elif abs(grid.x_max - params.x_max) > 1e-12 * params.x_max:
        raise ConfigError("grid x_max does not match the domain parameters")
    t0 = params.t0
    j0 = float(metric.jac0(t0))
    t_nodes = t0 - d3 * grid.nodes
    t_half = t0 - d3 * grid.half_nodes
    # clip roundoff at the bottom end
    t_nodes[-1] = -params.tau0
    a = metric.jac0(t_half) / j0
    w = metric.jac0(t_nodes) / j0
    q = params.y_scale * mu1(metric, t_nodes)
    base = params.y_scale * mu1(metric, t0)
    return ModelODEProblem(grid, np.asarray(a), np.asarray(w), np.asarray(q), base)


def fix_signs(vectors: Array, probe) -> Array:
    """Flip each row so that ``probe(row) > 0``."""
    out = vectors.copy()
    for k in range(out.shape[0]):
        if probe(out[k]) < 0:
            out[k] = -out[k]
    return out


def solve_model_ode(problem: ModelODEProblem, k_max: int = 4) -> Spectrum:
    """Lowest eigenpairs by LAPACK bisection (Sturm counts) plus inverse iteration."""
    n_int = problem.grid.n_intervals - 1
    if not 1 <= k_max <= min(6, n_int):
        raise ConfigError("k_max must be in 1..6")
    d, e = problem.symmetric()
    try:
        lam, z = eigh_tridiagonal(d, e, select="i", select_range=(0, k_max - 1), lapack_driver="stebz")
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure path
        raise NumericError(f"tridiagonal eigensolve failed: {exc}") from exc
    if not np.all(np.isfinite(z)):
        raise NumericError("inverse iteration returned non-finite vectors")
    h = problem.grid.h
    w_int = problem.weight[1:-1]
    U = np.zeros((k_max, problem.grid.n_nodes))
    U[:, 1:-1] = (z / np.sqrt(w_int * h)[:, None]).T
    U = fix_signs(U, lambda u: u[1])
    return Spectrum(np.asarray(lam), U, problem.weight.copy(), h, problem.tag, problem.grid,
                    {"base": problem.base})


def h1_norm(u: Array, h: float) -> float:
    """Discrete ``sqrt(|u|^2 + |u'|^2)`` with trapezoid and forward differences."""
    return float(np.sqrt(h * np.sum(u ** 2) + np.sum(np.diff(u) ** 2) / h))


@dataclass(frozen=True)
class AiryAsymptoticsReport:
    d3: float
    offsets: tuple[float, ...]        # lambda_k - base - a_k
    gap: float                         # lambda_2 - lambda_1
    moment_deviation: tuple[float, ...]  # int x |h_k^2 - v_k^2|
    key_integral: float                # int x (h_2^2 - h_1^2)
    key_deviation: float               # key_integral - 2/3 (a_2 - a_1)
    h1_norms: tuple[float, ...]
    tail_violation: float              # max of |h_1| / envelope beyond a_1 + 10 (<= 1 passes)
    tail_applicable: bool
    passed: bool
    checks: dict = field(default_factory=dict)


def verify_airy_asymptotics(spectrum: Spectrum, airy: AiryEigenbasis | None = None,
                            params: DomainParams | None = None, band: float = 0.5,
                            h1_bound: float = 10.0, tail_floor: float = 1e-30) -> AiryAsymptoticsReport:
    """Compare the model ODE spectrum with the half-line Airy problem.

    Bands are ``band * d3 * a_k`` for eigenvalues and ``band * d3`` for the
    key integral, with ``d3 = delta^(1/3)``.
    """
    if spectrum.k_max < 2:
        raise ConfigError("need at least two eigenpairs")
    airy = airy or build_airy_basis(max(2, min(spectrum.k_max, 4)))
    grid: Grid1D = spectrum.grid
    x, h = grid.nodes, grid.h
    d3 = params.d3 if params is not None else float("nan")
    base = spectrum.diagnostics.get("base", 0.0)
    kk = min(spectrum.k_max, airy.k_max)
    offsets = tuple(float(spectrum.eigenvalues[k] - base - airy.zeros[k]) for k in range(kk))
    gap = float(spectrum.eigenvalues[1] - spectrum.eigenvalues[0])
    # Airy functions beyond x_cut are below 1e-30, so the truncation is invisible
    xv = np.minimum(x, airy.x_cut)
    moments = []
    for k in (1, 2):
        hk = spectrum.vector(k)
        vk = np.where(x <= airy.x_cut, airy.v(k, xv), 0.0)
        moments.append(float(h * np.sum(x * np.abs(hk ** 2 - vk ** 2))))
    key = float(h * np.sum(x * (spectrum.vector(2) ** 2 - spectrum.vector(1) ** 2)))
    target = 2.0 / 3.0 * (airy.zeros[1] - airy.zeros[0])
    h1 = tuple(h1_norm(spectrum.vector(k), h) for k in (1, 2))

    h_1 = np.abs(spectrum.vector(1))
    x_star = airy.zeros[0] + 10.0
    tail = x >= x_star
    applicable = bool(np.any(tail))
    if applicable:
        # eigenvector roundoff sits near 1e-44 relative; the floor keeps it out
        env = (np.exp(-(x[tail] - x_star)) + tail_floor) * h_1.max()
        tail_violation = float(np.max(h_1[tail] / env))
    else:
        tail_violation = 0.0

    checks = {
        "eigenvalue_band": bool(np.isfinite(d3) and all(abs(o) <= band * d3 * airy.zeros[k]
                                                          for k, o in enumerate(offsets[:2]))),
        "gap_band": bool(np.isfinite(d3) and abs(gap - (airy.zeros[1] - airy.zeros[0])) <= band * d3 * airy.zeros[0]),
        "key_integral_band": bool(np.isfinite(d3) and abs(key - target) <= band * d3),
        "h1_bounded": all(v <= h1_bound for v in h1),
        "tail_envelope": tail_violation <= 1.0,
    }
    return AiryAsymptoticsReport(d3, offsets, gap, tuple(moments), key, key - target, h1,
                                 tail_violation, applicable, all(checks.values()), checks)
