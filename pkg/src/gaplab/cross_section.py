"""Cross-sectional eigendata mu_1(t), f_1 and the derived constants tau0, delta.

On a surface the cross-section is the interval (-1, 1) and the operator is
``-g_0^ss(t) d^2/dy^2`` with ``g_0^ss = J(0,t)^-2``, so everything is closed form:
``mu_1(t) = (pi/2)^2 / J(0,t)^2`` and ``f_1(y) = cos(pi y / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MonotonicityError
from .geometry import DomainParams, FermiMetric

MU_STRIP = (np.pi / 2.0) ** 2

# f_1 is t-independent on a surface, so d/dx of the rescaled f_1 vanishes
F1_T_INDEPENDENT = "f1_t_independent"


def mu1(metric: FermiMetric, t):
    """First Dirichlet eigenvalue of the cross-section at height t."""
    out = MU_STRIP / metric.jac0(t) ** 2
    return float(out) if np.ndim(out) == 0 else out


def mu1_prime(metric: FermiMetric, t):
    """``d mu_1 / dt = -2 (pi/2)^2 J_t(0,t) / J(0,t)^3``."""
    out = -2.0 * MU_STRIP * metric.jac0_t(t) / metric.jac0(t) ** 3
    return float(out) if np.ndim(out) == 0 else out


def f1(y):
    """L^2(-1,1)-normalized first cross-sectional eigenfunction."""
    return np.cos(0.5 * np.pi * np.asarray(y, dtype=float))


def choose_tau0(metric: FermiMetric, t0: float) -> float:
    """Bottom depth satisfying ``mu_1(-tau0) >= mu_1(t0/4)``.

    mu_1 peaks at t = 0 and decreases in |t|, so the admissible set is an
    interval ``(0, tau*]``.  We return the largest grid value in it, the deepest
    admissible bottom; a margin step beyond tau* would break the inequality.
    Values are capped one unit inside the stored grid.
    """
    if t0 <= 0:
        raise ConfigError("t0 must be positive")
    target = mu1(metric, 0.25 * t0)
    # candidate depths are the stored negative nodes, nearest to 0 first
    taus = -metric.t_grid[metric.t_grid < -1e-12][::-1]
    taus = taus[taus <= -metric.t_grid[0] - 1.0 + 1e-9]
    if taus.size == 0:
        raise ConfigError("metric grid does not extend below t = -1")
    ok = mu1(metric, -taus) >= target
    if not ok[0]:
        raise ConfigError("no admissible tau0 on the metric grid")
    bad = np.flatnonzero(~ok)
    last = (bad[0] - 1) if bad.size else ok.size - 1
    return float(taus[last])


def delta(metric: FermiMetric, t0: float, eps: float) -> float:
    """``delta = eps^2 / (-mu_1'(t0))``."""
    d = mu1_prime(metric, t0)
    if not d < 0:
        raise MonotonicityError(f"mu_1'(t0) = {d} is not negative")
    return eps ** 2 / (-d)


def make_params(metric: FermiMetric, t0: float, eps: float, tP_fraction: float = 0.4,
                tau0: float | None = None) -> DomainParams:
    """Assemble DomainParams with tau0 from :func:`choose_tau0` unless given."""
    if not 0.25 < tP_fraction < 0.5:
        raise ConfigError("tP_fraction must lie in (0.25, 0.5)")
    if tau0 is None:
        tau0 = choose_tau0(metric, t0)
    return DomainParams(t0=t0, tau0=tau0, eps=eps, tP=tP_fraction * t0, delta=delta(metric, t0, eps))


@dataclass(frozen=True, eq=False)
class CrossSectionData:
    metric: FermiMetric

    def mu1(self, t):
        return mu1(self.metric, t)

    def mu1_prime(self, t):
        return mu1_prime(self.metric, t)

    @staticmethod
    def f1(t, y):
        return np.broadcast_to(f1(y), np.broadcast(np.asarray(t), np.asarray(y)).shape)

    flags = (F1_T_INDEPENDENT,)
