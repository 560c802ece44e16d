"""Aggregate interference at the warden: Laplace transform and CDF.

The interference ``I`` seen by the nearest warden (other active D2D
transmitters plus jammers, Rayleigh fading, PPP geometry) has Laplace
transform ``exp(-nu * s**(2/alpha))``: a one-sided stable law. Its CDF is
recovered by Bromwich inversion along the branch cut,

    F(t) = 1 - 1/pi * int_0^inf sin(nu th^a sin b) exp(-nu th^a cos b - t th) dth / th

with ``a = 2/alpha`` and ``b = 2 pi / alpha``. Substituting ``th = u / t``
and then ``v = u**a`` shows ``F(t)`` depends on ``t`` only through
``kappa = nu * t**(-a)``; the integral becomes

    1 - F = alpha/(2 pi) * int_0^inf sin(kappa sin(b) v) exp(-kappa cos(b) v - v**(alpha/2)) dv / v

whose integrand is bounded at ``v = 0`` and decays like ``exp(-v**(alpha/2))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .model import SystemParams, Strategy
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, adaptive

# log of the Chernoff bound below which the CDF is reported as exactly zero
_LOG_NEGLIGIBLE = -36.0
# below this kappa the two-term small-kappa series is exact to ~kappa**3
_KAPPA_SERIES = 1e-6
_TABLE_NODES = 1024


@dataclass(frozen=True)
class InterferenceCdf:
    """CDF of the aggregate interference with Laplace transform exp(-nu s^(2/alpha))."""

    nu: float
    alpha: float

    def __post_init__(self):
        if self.nu < 0 or self.alpha <= 2:
            raise ValueError(f"need nu >= 0 and alpha > 2, got nu={self.nu}, alpha={self.alpha}")

    @classmethod
    def from_model(cls, params: SystemParams, strategy: Strategy) -> "InterferenceCdf":
        return cls(interference_nu(params, strategy), params.pathloss_exp)

    @property
    def scale(self) -> float:
        """Natural power scale nu**(alpha/2), watts."""
        return self.nu ** (self.alpha / 2.0)

    def kappa(self, t):
        return self.nu * np.asarray(t, dtype=float) ** (-2.0 / self.alpha)


def interference_nu(params: SystemParams, strategy: Strategy) -> float:
    a = 2.0 / params.pathloss_exp
    return params.sinc_factor * (
        params.lambda_d * params.p_active * strategy.p_d ** a + params.lambda_j * strategy.p_j ** a
    )


def interference_laplace(params: SystemParams, strategy: Strategy, s):
    """E[exp(-s I)] for the interference at the warden (product of the D2D and jammer PGFLs)."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("Laplace argument must be >= 0")
    a = 2.0 / params.pathloss_exp
    k = params.sinc_factor
    d2d = np.exp(-k * params.lambda_d * params.p_active * (s * strategy.p_d) ** a)
    jam = np.exp(-k * params.lambda_j * (s * strategy.p_j) ** a)
    return d2d * jam


def log_chernoff_bound(kappa, alpha):
    """log of inf_s exp(s - kappa s^a), an upper bound on F at unit time scale."""
    a = 2.0 / alpha
    return -(1.0 - a) / a * (a * kappa) ** (1.0 / (1.0 - a))


def negligible_kappa(alpha) -> float:
    """Smallest kappa with Chernoff bound below exp(_LOG_NEGLIGIBLE)."""
    a = 2.0 / alpha
    return (-_LOG_NEGLIGIBLE * a / (1.0 - a)) ** (1.0 - a) / a


def _series_tail(kappa, alpha):
    # two leading terms of P(I > t) = 1/pi sum (-1)^(k+1) Gamma(ak)/k! sin(pi a k) kappa^k
    a = 2.0 / alpha
    return (gamma(a) * math.sin(math.pi * a) * kappa
            - 0.5 * gamma(2 * a) * math.sin(2 * math.pi * a) * kappa ** 2) / math.pi


def _upper_limit(damp, alpha, cutoff):
    """v beyond which exp(-damp v - v^(alpha/2)) stays below exp(-cutoff) (past its peak)."""
    half = alpha / 2.0
    expo = lambda v: -damp * v - v ** half
    v_peak = 0.0 if damp >= 0 else (-damp / half) ** (1.0 / (half - 1.0))
    target = min(expo(v_peak), 0.0) - cutoff
    hi = max(v_peak, 1.0)
    while expo(hi) > target:
        hi *= 2.0
    return optimize.brentq(lambda v: expo(v) - target, v_peak, hi, xtol=1e-10)


def bromwich_tail(kappa: float, alpha: float, config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """P(I > t) at ``kappa = nu t^(-2/alpha)`` by direct quadrature of the inversion integral."""
    if kappa <= 0:
        return 0.0
    if log_chernoff_bound(kappa, alpha) < _LOG_NEGLIGIBLE:
        return 1.0
    beta = 2.0 * math.pi / alpha
    omega = kappa * math.sin(beta)
    damp = kappa * math.cos(beta)
    half = alpha / 2.0
    v_max = _upper_limit(damp, alpha, config.tail_cutoff)

    def integrand(v):
        # sin(omega v) / v written through the normalised sinc to stay finite at v = 0
        return omega * np.sinc(omega * v / math.pi) * math.exp(-damp * v - v ** half)

    # half-period breakpoints help QUADPACK with the oscillation
    n_half = int(omega * v_max / math.pi)
    points = list(np.arange(1, min(n_half, 100) + 1) * math.pi / omega) if n_half >= 1 else None
    value = adaptive(integrand, 0.0, v_max, config, points=points)
    return alpha / (2.0 * math.pi) * value


def interference_cdf(cdf: InterferenceCdf, t, config: QuadratureConfig = DEFAULT_QUADRATURE):
    """F(t) = P(I <= t) by numerical Bromwich inversion."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("interference_cdf needs t >= 0")
    out = np.empty(t_arr.shape)
    flat = out.reshape(-1)
    for i, ti in enumerate(t_arr.reshape(-1)):
        if ti == 0.0:
            flat[i] = 0.0
        elif cdf.nu == 0.0:
            flat[i] = 1.0
        else:
            flat[i] = 1.0 - bromwich_tail(float(cdf.kappa(ti)), cdf.alpha, config)
    return float(out) if out.ndim == 0 else out


class StableCdfTable:
    """Tabulated ``Phi(kappa) = F(t)`` for one path-loss exponent.

    ``F`` depends on ``(nu, t)`` only via ``kappa = nu t^(-2/alpha)``, so a
    single table per ``alpha`` serves every strategy. Nodes are uniform in
    ``log kappa`` between the series regime and the Chernoff cut; a cubic
    spline interpolates between them.
    """

    def __init__(self, alpha: float, config: QuadratureConfig = DEFAULT_QUADRATURE, nodes: int = _TABLE_NODES):
        self.alpha = alpha
        self.kappa_lo = _KAPPA_SERIES
        self.kappa_hi = negligible_kappa(alpha)
        z = np.linspace(math.log(self.kappa_lo), math.log(self.kappa_hi), nodes)
        phi = np.array([1.0 - bromwich_tail(math.exp(zi), alpha, config) for zi in z])
        self.log_kappa = z
        self.values = phi
        self._spline = CubicSpline(z, phi)

    def __call__(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        out = np.zeros(kappa.shape)
        small = kappa < self.kappa_lo
        mid = (~small) & (kappa < self.kappa_hi)
        if np.any(small):
            out[small] = 1.0 - _series_tail(kappa[small], self.alpha)
        if np.any(mid):
            out[mid] = self._spline(np.log(kappa[mid]))
        return np.clip(out, 0.0, 1.0)

    def cdf(self, nu, t):
        """F(t) for interference coefficient ``nu``; vectorised in ``t``."""
        t = np.asarray(t, dtype=float)
        if nu == 0.0:
            return (t > 0).astype(float)
        out = np.zeros(t.shape)
        pos = t > 0
        out[pos] = self(nu * t[pos] ** (-2.0 / self.alpha))
        return out

    def lower_support(self, nu):
        """t below which F(t) < exp(-36): ``(nu / kappa_hi)^(alpha/2)``."""
        return (nu / self.kappa_hi) ** (self.alpha / 2.0)


@lru_cache(maxsize=16)
def stable_cdf_table(alpha: float) -> StableCdfTable:
    return StableCdfTable(float(alpha))
