"""Airy function Ai, its zeros, and the half-line Dirichlet eigenfunctions.

Ai is evaluated without special-function tables:

* ``|x| <= 8``: Taylor series of the Airy equation about the nearest integer
  anchor.  The anchor values (Ai, Ai') are produced once by stepping the
  Taylor recurrence outward from the exact values at 0 (negative axis and
  ``x <= 1``) or inward from the asymptotic values at ``x = 10`` (``x >= 2``),
  which is the numerically stable direction on each side.
* ``|x| > 8``: the standard asymptotic expansions, cut at the smallest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "AiryEigenbasis",
    "ai",
    "ai_prime",
    "airy_zero",
    "airy_zeros",
    "build_airy_basis",
    "airy_eigenfunction",
    "model_integral",
    "X_CUT",
]

X_LIMIT = 50.0
SWITCH = 8.0
X_CUT = 40.0
K_MAX = 10
ZERO_SCAN = 14.0  # a_10 = 12.83, so the scan must reach past 12
SCAN_STEP = 0.25  # zero spacing drops below 1 (a_9 - a_8 = 0.93)

AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
AIP0 = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

_N_TAYLOR = 64
_N_ASYMP = 48


def _u_coefficients(n: int) -> np.ndarray:
    u = np.empty(n)
    u[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / (216.0 * k * (2 * k - 1))
    return u


_U = _u_coefficients(_N_ASYMP)
_V = np.array([1.0] + [-(6 * k + 1) / (6 * k - 1) * _U[k] for k in range(1, _N_ASYMP)])


def _truncated_sum(coef: np.ndarray, zeta: np.ndarray, stride: int, offset: int) -> np.ndarray:
    """Sum (-1)^j coef[stride*j+offset] zeta^-(stride*j+offset), stopping at the smallest term."""
    idx = np.arange(offset, _N_ASYMP, stride)
    signs = (-1.0) ** np.arange(idx.size)
    terms = signs[:, None] * coef[idx][:, None] * zeta[None, :] ** (-idx[:, None].astype(float))
    mags = np.abs(terms)
    # keep terms while magnitudes decrease
    growing = np.zeros_like(mags, dtype=bool)
    growing[1:] = mags[1:] > mags[:-1]
    keep = ~np.logical_or.accumulate(growing, axis=0)
    return np.sum(np.where(keep, terms, 0.0), axis=0)


def _asymptotic_positive(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    zeta = 2.0 / 3.0 * x ** 1.5
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    val = pref * x ** -0.25 * _truncated_sum(_U, zeta, 1, 0)
    der = -pref * x ** 0.25 * _truncated_sum(_V, zeta, 1, 0)
    return val, der


def _asymptotic_negative(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = -x
    zeta = 2.0 / 3.0 * z ** 1.5
    c = np.cos(zeta - math.pi / 4.0)
    s = np.sin(zeta - math.pi / 4.0)
    pref = 1.0 / math.sqrt(math.pi)
    val = pref * z ** -0.25 * (c * _truncated_sum(_U, zeta, 2, 0) + s * _truncated_sum(_U, zeta, 2, 1))
    der = pref * z ** 0.25 * (s * _truncated_sum(_V, zeta, 2, 0) - c * _truncated_sum(_V, zeta, 2, 1))
    return val, der


def _taylor(x0, y0, dy0, h, n_terms: int = _N_TAYLOR):
    """Value and derivative at x0+h of the Airy solution with data (y0, dy0) at x0.

    Uses c_{n+2} = (x0 c_n + c_{n-1}) / ((n+2)(n+1)); all arguments broadcast.
    """
    x0, y0, dy0, h = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x0, y0, dy0, h)))
    c_prev, c_n, c_next = np.zeros_like(y0), y0.copy(), dy0.copy()  # c_{n-1}, c_n, c_{n+1}
    val = c_n + c_next * h
    der = c_next.copy()
    hp = h.copy()  # h^(n+1) for the current c_next
    for n in range(0, n_terms - 2):
        c_new = (x0 * c_n + c_prev) / ((n + 2) * (n + 1))
        # c_new multiplies h^(n+2)
        der = der + (n + 2) * c_new * hp
        hp = hp * h
        val = val + c_new * hp
        c_prev, c_n, c_next = c_n, c_next, c_new
    return val, der


@lru_cache(maxsize=1)
def _anchors() -> dict[int, tuple[float, float]]:
    table: dict[int, tuple[float, float]] = {0: (AI0, AIP0)}
    y, dy = AI0, AIP0
    for a in range(0, -int(SWITCH), -1):
        y, dy = (float(v) for v in _taylor(a, y, dy, -1.0))
        table[a - 1] = (y, dy)
    y, dy = (float(v) for v in _taylor(0, AI0, AIP0, 1.0))
    table[1] = (y, dy)
    start = 10
    v, d = _asymptotic_positive(np.array([float(start)]))
    y, dy = float(v[0]), float(d[0])
    for a in range(start, 2, -1):
        y, dy = (float(val) for val in _taylor(a, y, dy, -1.0))
        if a - 1 <= SWITCH:
            table[a - 1] = (y, dy)
    return table


def _ai_and_prime(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > X_LIMIT):
        raise DomainError(f"ai: argument outside [-{X_LIMIT}, {X_LIMIT}]")
    flat = np.atleast_1d(x).ravel()
    val = np.empty_like(flat)
    der = np.empty_like(flat)

    mid = np.abs(flat) <= SWITCH
    if np.any(mid):
        xm = flat[mid]
        anchor = np.clip(np.rint(xm), -SWITCH, SWITCH).astype(int)
        table = _anchors()
        y0 = np.array([table[a][0] for a in anchor])
        dy0 = np.array([table[a][1] for a in anchor])
        v, d = _taylor(anchor.astype(float), y0, dy0, xm - anchor)
        val[mid], der[mid] = v, d
    pos = flat > SWITCH
    if np.any(pos):
        val[pos], der[pos] = _asymptotic_positive(flat[pos])
    neg = flat < -SWITCH
    if np.any(neg):
        val[neg], der[neg] = _asymptotic_negative(flat[neg])
    return val.reshape(np.shape(x)), der.reshape(np.shape(x))


def ai(x):
    """Airy function Ai(x) for real ``|x| <= 50`` (scalar or array)."""
    v = _ai_and_prime(x)[0]
    return float(v) if np.ndim(v) == 0 else v


def ai_prime(x):
    """Derivative Ai'(x)."""
    d = _ai_and_prime(x)[1]
    return float(d) if np.ndim(d) == 0 else d


@lru_cache(maxsize=1)
def airy_zeros() -> tuple[float, ...]:
    """Positive numbers a_1 < ... < a_10 with Ai(-a_k) = 0."""
    f = lambda a: ai(-a)
    edges = np.arange(0.0, ZERO_SCAN + SCAN_STEP, SCAN_STEP)
    vals = [f(e) for e in edges]
    roots = []
    for lo, hi, flo, fhi in zip(edges[:-1], edges[1:], vals[:-1], vals[1:]):
        if flo == 0.0:
            roots.append(float(lo))
        elif flo * fhi < 0.0:
            roots.append(brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200))
    if len(roots) < K_MAX:
        raise RuntimeError(f"zero scan found only {len(roots)} zeros of Ai")
    return tuple(roots[:K_MAX])


def airy_zero(k: int) -> float:
    """k-th zero magnitude a_k (1-based), ``1 <= k <= 10``."""
    if not 1 <= k <= K_MAX:
        raise IndexError(f"airy_zero: k={k} outside 1..{K_MAX}")
    return airy_zeros()[k - 1]


@dataclass(frozen=True)
class AiryEigenbasis:
    zeros: tuple[float, ...]
    norms: tuple[float, ...]
    k_max: int
    x_cut: float = X_CUT

    def __post_init__(self):
        z = np.asarray(self.zeros)
        if len(self.zeros) != self.k_max or len(self.norms) != self.k_max:
            raise ValueError("zeros/norms length must equal k_max")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise ValueError("Airy zeros must be positive and strictly increasing")
        if np.any(np.asarray(self.norms) <= 0):
            raise ValueError("Airy eigenfunction norms must be positive")

    def v(self, k: int, x):
        """Normalized eigenfunction v_k(x) = Ai(x - a_k) / N_k on x >= 0."""
        if not 1 <= k <= self.k_max:
            raise IndexError(f"k={k} outside 1..{self.k_max}")
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("Airy eigenfunctions live on x >= 0")
        out = np.asarray(ai(x - self.zeros[k - 1])) / self.norms[k - 1]
        out = np.where(x == 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out


def half_line_nodes(x_cut: float = X_CUT, n_intervals: int = 8000) -> np.ndarray:
    return np.linspace(0.0, x_cut, n_intervals + 1)


@lru_cache(maxsize=8)
def build_airy_basis(k_max: int = 4, x_cut: float = X_CUT, n_intervals: int = 8000) -> AiryEigenbasis:
    """Zeros and composite-Simpson norms of Ai(. - a_k) over (0, x_cut)."""
    if not 1 <= k_max <= K_MAX:
        raise IndexError(f"k_max={k_max} outside 1..{K_MAX}")
    x = half_line_nodes(x_cut, n_intervals)
    zeros = airy_zeros()[:k_max]
    norms = tuple(math.sqrt(simpson(np.asarray(ai(x - a)) ** 2, x=x)) for a in zeros)
    return AiryEigenbasis(zeros=zeros, norms=norms, k_max=k_max, x_cut=x_cut)


def airy_eigenfunction(k: int, x, basis: AiryEigenbasis | None = None):
    basis = basis or build_airy_basis(max(k, 4))
    return basis.v(k, x)


def model_integral(basis: AiryEigenbasis | None = None, n_intervals: int = 8000) -> float:
    """Quadrature of the first moment of v_2^2 - v_1^2 over (0, x_cut).

    Equals (2/3)(a_2 - a_1) in exact arithmetic.
    """
    basis = basis or build_airy_basis()
    if basis.k_max < 2:
        raise ValueError("model integral needs at least two Airy eigenfunctions")
    x = half_line_nodes(basis.x_cut, n_intervals)
    return float(simpson(x * (basis.v(2, x) ** 2 - basis.v(1, x) ** 2), x=x))
