"""Surfaces in Fermi coordinates, the domain parameters, and convexity checks.

A negatively curved surface is written near a geodesic as ``dt^2 + J(s,t)^2 ds^2``
where the warping factor solves the Jacobi equation ``J'' = -K J`` in ``t`` with
``J(s,0) = 1`` and ``J_t(s,0) = 0``.  The metric g has warping ``J(s,t)``; the
frozen metric g_0 uses ``J(0,t)`` for every ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, NumericError, ProfileError

Array = np.ndarray


# ----------------------------------------------------------------------------
# curvature profiles


@dataclass(frozen=True)
class CurvatureProfile:
    """Sectional curvature ``K(s, t) = -(k0 + ks s^2 + kt t^2 + kst s^2 t^2)``.

    The built-in test geometries are members of this family:

    ==== =====================================
    G1   K = -1
    G2   K = -1 - 0.2 t^2
    G3   K = -(1 + 0.5 s^2)(1 + 0.2 t^2)
    ==== =====================================
    """

    name: str
    k0: float = 1.0
    ks: float = 0.0
    kt: float = 0.0
    kst: float = 0.0

    def __post_init__(self):
        if self.k0 <= 0:
            raise ProfileError(f"profile {self.name!r}: k0 must be positive")
        if min(self.ks, self.kt, self.kst) < 0:
            raise ProfileError(f"profile {self.name!r}: coefficients must be non-negative")

    @property
    def k_floor(self) -> float:
        return self.k0

    @property
    def s_independent(self) -> bool:
        return self.ks == 0.0 and self.kst == 0.0

    def K(self, s, t):
        s2 = np.asarray(s, dtype=float) ** 2
        t2 = np.asarray(t, dtype=float) ** 2
        return -(self.k0 + self.ks * s2 + self.kt * t2 + self.kst * s2 * t2)

    def check(self, s_grid, t_grid) -> None:
        S, T = np.meshgrid(s_grid, t_grid, indexing="ij")
        k = self.K(S, T)
        if not np.all(np.isfinite(k)) or np.any(k > -self.k_floor * (1 - 1e-12)):
            raise ProfileError(f"profile {self.name!r}: curvature not <= -k_floor on the grid")


BUILTIN_PROFILES: dict[str, tuple[float, float, float, float]] = {
    "G1": (1.0, 0.0, 0.0, 0.0),
    "G2": (1.0, 0.0, 0.2, 0.0),
    "G3": (1.0, 0.5, 0.2, 0.1),
}


def builtin_profile(name: str, params=None) -> CurvatureProfile:
    """Look up G1/G2/G3, or build ``custom`` from ``[k0, ks, kt, kst]``."""
    if name in BUILTIN_PROFILES:
        if params:
            raise ConfigError(f"{name} takes no parameters")
        return CurvatureProfile(name, *BUILTIN_PROFILES[name])
    if name == "custom":
        if params is None or not 1 <= len(params) <= 4:
            raise ConfigError("custom profile needs 1..4 coefficients [k0, ks, kt, kst]")
        return CurvatureProfile("custom", *map(float, params))
    raise ConfigError(f"unknown geometry {name!r}")


# ----------------------------------------------------------------------------
# Jacobi fields


def t_grid(t_lo: float, t_hi: float, h: float = 1e-3) -> Array:
    """Uniform grid on ``[t_lo, t_hi]`` with ``t = 0`` as a node."""
    if not t_lo < 0 < t_hi:
        raise ConfigError("t grid must straddle 0")
    lo = int(np.ceil(-t_lo / h - 1e-9))
    hi = int(np.ceil(t_hi / h - 1e-9))
    return h * np.arange(-lo, hi + 1)


def _rk4_sweep(profile: CurvatureProfile, s: Array, ts: Array):
    """Integrate (J, J') along the node sequence ``ts`` (starting at t=0)."""
    n = ts.size
    J = np.empty((s.size, n))
    D = np.empty((s.size, n))
    J[:, 0], D[:, 0] = 1.0, 0.0
    y, v = J[:, 0].copy(), D[:, 0].copy()
    K = profile.K
    for i in range(n - 1):
        t, h = ts[i], ts[i + 1] - ts[i]
        k_a = K(s, t)
        k_m = K(s, t + 0.5 * h)
        k_b = K(s, t + h)
        y1, v1 = v, -k_a * y
        y2, v2 = v + 0.5 * h * v1, -k_m * (y + 0.5 * h * y1)
        y3, v3 = v + 0.5 * h * v2, -k_m * (y + 0.5 * h * y2)
        y4, v4 = v + h * v3, -k_b * (y + h * y3)
        y = y + h / 6.0 * (y1 + 2 * y2 + 2 * y3 + y4)
        v = v + h / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)
        J[:, i + 1], D[:, i + 1] = y, v
    return J, D


@dataclass(frozen=True, eq=False)
class FermiMetric:
    """Gridded warping factor J and its t-derivative.

    ``J[i, j]`` is ``J(s_grid[i], t_grid[j])``.  Off-node values in ``t`` come
    from cubic Hermite interpolation of (J, J_t) and of (J_t, J_tt = -K J), so
    both the value and the derivative keep fourth-order accuracy.
    """

    profile: CurvatureProfile
    s_grid: Array
    t_grid: Array
    J: Array
    dJdt: Array
    s0_index: int = field(init=False)

    def __post_init__(self):
        hits = np.flatnonzero(self.s_grid == 0.0)
        if hits.size != 1:
            raise ConfigError("s grid must contain s = 0 exactly once")
        object.__setattr__(self, "s0_index", int(hits[0]))

    @property
    def t_step(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_grid[0], self.t_grid[-1]
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise DomainError(f"t outside metric grid [{lo}, {hi}]")
        h = self.t_step
        idx = np.clip(np.floor((t - lo) / h).astype(int), 0, self.t_grid.size - 2)
        u = (t - self.t_grid[idx]) / h
        return t, idx, u, h

    @staticmethod
    def _hermite(f0, f1, d0, d1, u, h):
        u2, u3 = u * u, u * u * u
        return ((2 * u3 - 3 * u2 + 1) * f0 + (u3 - 2 * u2 + u) * h * d0
                + (-2 * u3 + 3 * u2) * f1 + (u3 - u2) * h * d1)

    def _rows(self, rows):
        return slice(None) if rows is None else rows

    def warp(self, t, rows=None) -> Array:
        """J at the given t for the selected s rows; shape ``(n_rows, *t.shape)``."""
        t, idx, u, h = self._locate(t)
        r = self._rows(rows)
        J, D = self.J[r], self.dJdt[r]
        return self._hermite(J[..., idx], J[..., idx + 1], D[..., idx], D[..., idx + 1], u, h)

    def warp_t(self, t, rows=None) -> Array:
        """Partial derivative J_t at the given t."""
        t, idx, u, h = self._locate(t)
        r = self._rows(rows)
        J, D = self.J[r], self.dJdt[r]
        s = self.s_grid[r]
        s_col = np.asarray(s).reshape(np.shape(s) + (1,) * idx.ndim)
        dd0 = -self.profile.K(s_col, self.t_grid[idx]) * J[..., idx]
        dd1 = -self.profile.K(s_col, self.t_grid[idx + 1]) * J[..., idx + 1]
        return self._hermite(D[..., idx], D[..., idx + 1], dd0, dd1, u, h)

    def jac0(self, t) -> Array:
        """Jacobian of the frozen metric g_0, i.e. J(0, t)."""
        return self.warp(t, rows=self.s0_index)

    def jac0_t(self, t) -> Array:
        return self.warp_t(t, rows=self.s0_index)

    def rows_for(self, s_values) -> Array:
        """Indices of the stored s rows matching ``s_values`` exactly (to 1e-13)."""
        s_values = np.asarray(s_values, dtype=float)
        idx = np.searchsorted(self.s_grid, s_values)
        idx = np.clip(idx, 0, self.s_grid.size - 1)
        left = np.clip(idx - 1, 0, self.s_grid.size - 1)
        best = np.where(np.abs(self.s_grid[left] - s_values) < np.abs(self.s_grid[idx] - s_values), left, idx)
        scale = max(1.0, float(np.max(np.abs(self.s_grid))))
        if np.any(np.abs(self.s_grid[best] - s_values) > 1e-13 * scale):
            raise ConfigError("requested s values are not rows of this metric")
        return best


def solve_jacobi(profile: CurvatureProfile, s_grid, t_nodes) -> FermiMetric:
    """Classical RK4 for ``J'' = -K(s, t) J`` from t = 0, forward and backward.

    ``t_nodes`` must be uniform and contain 0.  All s rows are integrated at once.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    t_nodes = np.asarray(t_nodes, dtype=float)
    if t_nodes.ndim != 1 or t_nodes.size < 3:
        raise ConfigError("t grid must be a 1-D array with at least 3 nodes")
    steps = np.diff(t_nodes)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
        raise ConfigError("t grid must be uniform and increasing")
    zero = np.flatnonzero(np.abs(t_nodes) < 1e-12 * steps[0])
    if zero.size != 1:
        raise ConfigError("t grid must contain t = 0 as a node")
    profile.check(s_grid, t_nodes)
    i0 = int(zero[0])
    # exact zero avoids a spurious first step
    ts = t_nodes.copy()
    ts[i0] = 0.0
    Jf, Df = _rk4_sweep(profile, s_grid, ts[i0:])
    Jb, Db = _rk4_sweep(profile, s_grid, ts[i0::-1])
    J = np.concatenate([Jb[:, :0:-1], Jf], axis=1)
    D = np.concatenate([Db[:, :0:-1], Df], axis=1)
    if np.any(J <= 0):
        raise NumericError("Jacobi field vanished; curvature profile is not negative")
    return FermiMetric(profile=profile, s_grid=s_grid, t_grid=ts, J=J, dJdt=D)


def build_metric(profile: CurvatureProfile, t0: float, s_max: float, n_s: int = 121,
                 t_step: float = 1e-3, t_pad: float = 1.0) -> FermiMetric:
    """Metric on ``[-s_max, s_max] x [-(t0 + t_pad), t0 + t_pad]``.

    ``n_s`` must be odd so that s = 0 is a row.  The negative t range equals the
    positive one, which covers every admissible tau0 (tau0 <= t0/4 for
    t-symmetric profiles) plus the padding.
    """
    if n_s % 2 == 0:
        raise ConfigError("n_s must be odd")
    s_grid = np.linspace(-s_max, s_max, n_s)
    s_grid[n_s // 2] = 0.0
    return solve_jacobi(profile, s_grid, t_grid(-(t0 + t_pad), t0 + t_pad, t_step))


# ----------------------------------------------------------------------------
# domain parameters and the potential


@dataclass(frozen=True)
class DomainParams:
    """Construction constants of the domain and the rescaling.

    ``t0`` top height, ``tau0`` bottom depth, ``eps`` half-width in s, ``tP``
    onset of the potential, ``delta = eps^2 / (-mu_1'(t0))``.
    """

    t0: float
    tau0: float
    eps: float
    tP: float
    delta: float

    def __post_init__(self):
        vals = (self.t0, self.tau0, self.eps, self.tP, self.delta)
        if not all(np.isfinite(vals)):
            raise ConfigError("domain parameters must be finite")
        if self.t0 <= 0 or self.eps <= 0 or self.delta <= 0:
            raise ConfigError("t0, eps and delta must be positive")
        if self.tau0 < 0:
            raise ConfigError("tau0 must be non-negative")
        if not self.t0 / 4 < self.tP < self.t0 / 2:
            raise ConfigError(f"tP={self.tP} must lie in (t0/4, t0/2)")

    @property
    def d3(self) -> float:
        """delta^(1/3), the vertical length scale."""
        return self.delta ** (1.0 / 3.0)

    @property
    def x_max(self) -> float:
        return (self.t0 + self.tau0) / self.d3

    @property
    def y_scale(self) -> float:
        """delta^(2/3) eps^-2, the weight of the cross-sectional operator."""
        return self.delta ** (2.0 / 3.0) / self.eps ** 2


@dataclass(frozen=True)
class CubicPotential:
    """``P(t) = 0`` for ``t <= tP`` and ``(t - tP)^3`` above; C^2 at the junction."""

    tP: float

    def __call__(self, t):
        z = np.maximum(np.asarray(t, dtype=float) - self.tP, 0.0)
        return z ** 3

    def derivative(self, t):
        z = np.maximum(np.asarray(t, dtype=float) - self.tP, 0.0)
        return 3.0 * z ** 2

    def second_derivative(self, t):
        z = np.maximum(np.asarray(t, dtype=float) - self.tP, 0.0)
        return 6.0 * z


@dataclass(frozen=True)
class ZeroPotential:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    derivative = second_derivative = __call__


def _check_t(t, params: DomainParams):
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * max(1.0, params.t0)
    if np.any(t < -params.tau0 - tol) or np.any(t > params.t0 + tol):
        raise DomainError("t outside [-tau0, t0]")
    return t


def potential(t, params: DomainParams):
    """Cubic potential of the construction, restricted to ``[-tau0, t0]``."""
    return CubicPotential(params.tP)(_check_t(t, params))


def potential_derivative(t, params: DomainParams):
    return CubicPotential(params.tP).derivative(_check_t(t, params))


# ----------------------------------------------------------------------------
# convexity certificates

SIDE_FLAG = "sides_geodesic_weakly_convex"


@dataclass(frozen=True)
class ConvexityCertificate:
    passed: bool
    top_margin: float
    bottom_margin: float
    flags: tuple[str, ...]


@dataclass(frozen=True)
class PotentialConvexityCertificate:
    passed: bool
    worst_margin: float
    top_row_margin: float
    flags: tuple[str, ...] = ()


def _rows_within(metric: FermiMetric, eps: float) -> Array:
    rows = np.flatnonzero(np.abs(metric.s_grid) <= eps * (1 + 1e-12))
    if rows.size == 0:
        raise DomainError("no metric rows inside |s| <= eps")
    if metric.s_grid.min() > -eps * (1 - 1e-12) or metric.s_grid.max() < eps * (1 - 1e-12):
        raise DomainError("metric s grid does not cover [-eps, eps]")
    return rows


def convexity_report(metric: FermiMetric, params: DomainParams) -> ConvexityCertificate:
    """Sampled boundary convexity of the domain.

    Top arc: geodesic curvature J_t/J at t0 must be positive.  Bottom arc:
    -J_t/J at -tau0 must be positive.  Side curves s = +-eps are normal
    geodesics on a surface (curvature exactly 0), recorded by a flag.
    """
    if params.t0 > metric.t_grid[-1] or -params.tau0 < metric.t_grid[0]:
        raise DomainError("domain parameters outside the metric grid")
    rows = _rows_within(metric, params.eps)
    top = metric.warp_t(params.t0, rows) / metric.warp(params.t0, rows)
    bot = -metric.warp_t(-params.tau0, rows) / metric.warp(-params.tau0, rows)
    top_m, bot_m = float(np.min(top)), float(np.min(bot))
    flags = [SIDE_FLAG]
    if params.tau0 == 0.0:
        flags.append("degenerate_bottom_tau0_zero")
    passed = top_m > 0 and bot_m > 0
    if not passed:
        flags.append("convexity_fail")
    return ConvexityCertificate(passed, top_m, bot_m, tuple(flags))


def potential_convexity_report(metric: FermiMetric, params: DomainParams,
                               pot: CubicPotential | None = None) -> PotentialConvexityCertificate:
    """Hessian of a t-only potential: ``P'' >= 0`` and ``(J_t/J) P' >= 0`` on the domain."""
    pot = pot or CubicPotential(params.tP)
    rows = _rows_within(metric, params.eps)
    mask = (metric.t_grid >= -params.tau0) & (metric.t_grid <= params.t0)
    t = np.append(metric.t_grid[mask], params.t0)
    tangential = metric.warp_t(t, rows) / metric.warp(t, rows) * pot.derivative(t)
    normal = np.broadcast_to(pot.second_derivative(t), tangential.shape)
    margins = np.minimum(tangential, normal)
    worst = float(np.min(margins))
    top_row = float(np.min(margins[:, -1]))
    passed = worst >= 0.0
    return PotentialConvexityCertificate(passed, worst, top_row, () if passed else ("potential_convexity_fail",))
