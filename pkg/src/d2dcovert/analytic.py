"""Deterministic evaluation of the link, warden and utility probabilities.

Conventions: ``tau`` is the warden's power-detection threshold in watts and
``x = tau - N_w`` the part of it left after the warden's noise floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .interference import (
    InterferenceCdf,
    StableCdfTable,
    interference_cdf,
    interference_laplace,  # noqa: F401  (re-exported)
    interference_nu,
    stable_cdf_table,
)
from .model import DomainError, ProbabilityBundle, Strategy, SystemParams
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, adaptive, panel_count, unit_panel_rule

_CLAMP_SLACK = 1e-6


def clamp_probability(value, what="probability"):
    """Clamp to [0, 1]; values outside [-1e-6, 1 + 1e-6] indicate a bug, not noise."""
    v = np.asarray(value, dtype=float)
    if np.any(v < -_CLAMP_SLACK) or np.any(v > 1 + _CLAMP_SLACK) or np.any(~np.isfinite(v)):
        raise ArithmeticError(f"{what} out of range before clamping: {value!r}")
    out = np.clip(v, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# typical link


def success_probability(params: SystemParams, strategy: Strategy) -> float:
    """P[SINR_d > xi_D | transmitter active] for the typical D2D link.

    Rayleigh fading turns the probability into the Laplace transform of
    noise plus interference at ``R^alpha xi_D / p_D``; the PGFL of each PPP
    gives one exponential factor.
    """
    if strategy.p_d <= 0:
        raise DomainError("success probability needs p_d > 0")
    alpha = params.pathloss_exp
    a = 2.0 / alpha
    R, xi, k = params.link_distance, params.sinr_thresh_d2d, params.sinc_factor
    noise = math.exp(-R ** alpha * xi * params.noise_rx / strategy.p_d)
    d2d = math.exp(-k * params.lambda_d * params.p_active * R ** 2 * xi ** a)
    jam = math.exp(-k * params.lambda_j * R ** 2 * (strategy.p_j / strategy.p_d * xi) ** a)
    return noise * d2d * jam


# ----------------------------------------------------------------------------
# nearest warden


@dataclass(frozen=True)
class NearestWardenDistance:
    """Distance from a point to the nearest warden of a PPP with density ``lambda_w``."""

    lambda_w: float

    def __post_init__(self):
        if not self.lambda_w > 0:
            raise ValueError("warden density must be > 0")

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        lp = self.lambda_w * math.pi
        return np.exp(-lp * r * r) * 2.0 * lp * r

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        return -np.expm1(-self.lambda_w * math.pi * r * r)

    def expect(self, g, config: QuadratureConfig = DEFAULT_QUADRATURE):
        """E[g(r)] with r the nearest-warden distance.

        Integrates over ``u = lambda pi r^2 ~ Exp(1)``, truncated where
        ``exp(-u)`` drops below ``exp(-tail_cutoff)``.
        """
        lp = self.lambda_w * math.pi
        return adaptive(lambda u: math.exp(-u) * g(math.sqrt(u / lp)), 0.0, config.tail_cutoff, config)


def secrecy_outage_probability(params: SystemParams, strategy: Strategy,
                               config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """P[SINR at the nearest warden > xi_W | transmitter active]."""
    if strategy.p_d <= 0:
        raise DomainError("secrecy outage needs p_d > 0")
    alpha = params.pathloss_exp
    a = 2.0 / alpha
    xi, k = params.sinr_thresh_warden, params.sinc_factor
    noise_coef = xi * params.noise_warden / strategy.p_d
    interf_coef = k * (params.lambda_d * params.p_active * xi ** a
                       + params.lambda_j * (strategy.p_j / strategy.p_d * xi) ** a)

    def conditional(r):
        return math.exp(-noise_coef * r ** alpha - interf_coef * r * r)

    value = NearestWardenDistance(params.lambda_w).expect(conditional, config)
    return clamp_probability(value, "secrecy outage")


# ----------------------------------------------------------------------------
# received power of the target transmitter at its nearest warden
#
# S = p_D g r^-alpha with g ~ Exp(1) and lambda_w pi r^2 = u ~ Exp(1), so
# S = c * S0 with c = p_D (lambda_w pi)^(alpha/2) and S0 = g u^(-alpha/2)
# a law depending on alpha only:
#   f_S0(s) = int_0^inf u^(alpha/2) exp(-u - s u^(alpha/2)) du
#   P(S0 > s) = int_0^inf exp(-u - s u^(alpha/2)) du


def signal_scale(params: SystemParams, strategy: Strategy) -> float:
    return strategy.p_d * (params.lambda_w * math.pi) ** (params.pathloss_exp / 2.0)


def conditional_signal_density(params: SystemParams, strategy: Strategy, t,
                               config: QuadratureConfig = DEFAULT_QUADRATURE):
    """Density of ``p_D g r^-alpha`` at ``t`` by direct quadrature over the warden distance."""
    if strategy.p_d <= 0:
        raise DomainError("signal density needs p_d > 0")
    alpha, p = params.pathloss_exp, strategy.p_d
    dist = NearestWardenDistance(params.lambda_w)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("density argument must be >= 0")
    lp = params.lambda_w * math.pi
    r_max = math.sqrt(config.tail_cutoff / lp)

    def one(ti):
        # for large t the mass sits near r ~ (p / t)^(1/alpha), far inside the distance law's bulk
        r_peak = (p / ti) ** (1.0 / alpha) if ti > 0 else r_max
        pts = [r_peak * k for k in (0.1, 0.5, 1.0, 2.0, 10.0) if r_peak * k < r_max]
        f = lambda r: float(dist.pdf(r)) * math.exp(-ti * r ** alpha / p) * r ** alpha / p
        return adaptive(f, 0.0, r_max, config, pts or None)

    out = np.array([one(ti) for ti in t_arr.reshape(-1)]).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def _s0_integrals(s, alpha, config):
    half = alpha / 2.0
    # the mass sits near u ~ s^(-2/alpha) when s is large
    u_peak = min(s ** (-2.0 / alpha), 1.0) if s > 0 else 1.0
    pts = [u_peak * f for f in (0.1, 1.0, 10.0)]
    dens = adaptive(lambda u: u ** half * math.exp(-u - s * u ** half), 0.0, config.tail_cutoff + 20, config, pts)
    surv = adaptive(lambda u: math.exp(-u - s * u ** half), 0.0, config.tail_cutoff + 20, config, pts)
    return dens, surv


class SignalTable:
    """Cubic-spline tables of ``log f_S0`` and the CDF of ``S0`` in ``log s``.

    Outside ``[s_lo, s_hi]`` two-term asymptotic expansions take over.
    """

    def __init__(self, alpha: float, config: QuadratureConfig = DEFAULT_QUADRATURE, nodes: int = 1536,
                 s_lo: float = 1e-12, s_hi: float = 1e12):
        self.alpha = alpha
        self.s_lo, self.s_hi = s_lo, s_hi
        z = np.linspace(math.log(s_lo), math.log(s_hi), nodes)
        dens, surv = np.array([_s0_integrals(math.exp(zi), alpha, config) for zi in z]).T
        self._log_f = CubicSpline(z, np.log(dens))
        # interpolate log of whichever of F / 1-F is smaller to keep relative accuracy
        self._log_cdf = CubicSpline(z, np.log1p(-surv))
        self._log_surv = CubicSpline(z, np.log(surv))
        self._switch = z[np.argmin(np.abs(surv - 0.5))]
        a = 2.0 / alpha
        self._small = (gamma(1 + alpha / 2), gamma(1 + alpha))
        self._large = (gamma(1 + a), a * gamma(2 * a))

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        lo, hi = s < self.s_lo, s > self.s_hi
        mid = ~(lo | hi)
        g1, g2 = self._small
        out[lo] = g1 - g2 * s[lo]
        A, B = self._large
        a = 2.0 / self.alpha
        out[hi] = a * A * s[hi] ** (-a - 1) - 2 * a * B * s[hi] ** (-2 * a - 1)
        out[mid] = np.exp(self._log_f(np.log(s[mid])))
        return out

    def cdf(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape)
        lo, hi = s < self.s_lo, s > self.s_hi
        mid = ~(lo | hi)
        g1, g2 = self._small
        out[lo] = np.where(s[lo] > 0, g1 * s[lo] - 0.5 * g2 * s[lo] ** 2, 0.0)
        A, B = self._large
        a = 2.0 / self.alpha
        out[hi] = 1.0 - (A * s[hi] ** (-a) - B * s[hi] ** (-2 * a))
        z = np.log(s[mid])
        out[mid] = np.where(z < self._switch, np.exp(self._log_cdf(z)), -np.expm1(self._log_surv(z)))
        return np.clip(out, 0.0, 1.0)


@lru_cache(maxsize=16)
def signal_table(alpha: float) -> SignalTable:
    return SignalTable(float(alpha))


# ----------------------------------------------------------------------------
# warden detection


class WardenModel:
    """Warden-side distributions for one ``(params, strategy)`` evaluation context.

    Holds the interference coefficient ``nu``, the signal scale ``c`` and
    the per-``alpha`` tables; FA, MD and detection error are vectorised in
    ``tau``.

    The MD convolution ``int_0^x f_S(t) F_I(x - t) dt`` is split at ``x/2``:
    on the lower half the signal density is integrated in ``log t``, on the
    upper half the interference CDF is integrated in ``log(x - t)``. Both
    halves use the fixed composite rule from :func:`panel_rule`.
    """

    def __init__(self, params: SystemParams, strategy: Strategy,
                 cdf_table: StableCdfTable | None = None, sig_table: SignalTable | None = None,
                 panel_width: float = 0.25, order: int = 8):
        if strategy.p_d <= 0:
            raise DomainError("warden model needs p_d > 0")
        self.params = params
        self.strategy = strategy
        self.alpha = params.pathloss_exp
        self.noise = params.noise_warden
        self.nu = interference_nu(params, strategy)
        self.c = signal_scale(params, strategy)
        self.cdf_table = cdf_table or stable_cdf_table(self.alpha)
        self.sig_table = sig_table or signal_table(self.alpha)
        self.panel_width = panel_width
        self.order = order

    # interference part
    def interference_cdf(self, y):
        return self.cdf_table.cdf(self.nu, y)

    # target-signal part
    def signal_pdf(self, t):
        return self.sig_table.pdf(np.asarray(t, dtype=float) / self.c) / self.c

    def signal_cdf(self, t):
        return self.sig_table.cdf(np.asarray(t, dtype=float) / self.c)

    def _md_many(self, x):
        """MD at gaps ``x = tau - N`` (1-D array); each gap gets its own fixed rule."""
        out = np.zeros(x.shape)
        pos = x > 0
        if not pos.any():
            return out
        if self.nu == 0.0:
            out[pos] = self.signal_cdf(x[pos])
            return out
        xs = x[pos]
        h = 0.5 * xs
        c = self.c
        # lower half: s = t / c in log space; the sliver below s_lo is added as F_S0(s_lo) F_I(x)
        s_hi = h / c
        s_lo = np.minimum(s_hi, 1.0) * 1e-7
        z, w, owner = self._stack(np.log(s_lo), np.log(s_hi))
        s = np.exp(z)
        terms = w * s * self.sig_table.pdf(s) * self.interference_cdf(xs[owner] - c * s)
        lower = np.bincount(owner, terms, minlength=len(xs))
        lower += self.sig_table.cdf(s_lo) * self.interference_cdf(xs)
        # upper half: y = x - t in log space; F_I(y) is negligible below y_lo
        y_lo = self.cdf_table.lower_support(self.nu)
        lo = np.full(len(xs), math.log(y_lo))
        hi = np.log(h)
        z, w, owner = self._stack(lo, hi)
        y = np.exp(z)
        terms = w * y * self.signal_pdf(xs[owner] - y) * self.interference_cdf(y)
        upper = np.bincount(owner, terms, minlength=len(xs))
        out[pos] = lower + upper
        return out

    def _stack(self, lo, hi):
        """Concatenated panel rules for the intervals ``[lo_k, hi_k]`` and the owning interval index."""
        zs, ws, owner = [], [], []
        for k, (a, b) in enumerate(zip(lo, hi)):
            if b <= a:
                continue
            u, w = unit_panel_rule(panel_count(a, b, self.panel_width), self.order)
            zs.append(a + (b - a) * u)
            ws.append((b - a) * w)
            owner.append(np.full(u.size, k))
        if not zs:
            return np.empty(0), np.empty(0), np.empty(0, dtype=int)
        return np.concatenate(zs), np.concatenate(ws), np.concatenate(owner)

    def fa(self, tau):
        tau = np.asarray(tau, dtype=float)
        x = tau - self.noise
        out = np.ones(tau.shape)
        pos = x > 0
        out[pos] = 1.0 - self.interference_cdf(x[pos])
        return clamp_probability(out, "FA")

    def md(self, tau):
        tau = np.asarray(tau, dtype=float)
        vals = self._md_many(tau.reshape(-1) - self.noise).reshape(tau.shape)
        return clamp_probability(vals if vals.ndim else float(vals), "MD")

    def detection_error(self, tau):
        return self.fa(tau) + self.md(tau)


def fa_probability(params: SystemParams, strategy: Strategy, tau,
                   config: QuadratureConfig = DEFAULT_QUADRATURE):
    """False-alarm probability ``1 - F_I(tau - N_w)`` by direct Bromwich inversion."""
    tau = np.asarray(tau, dtype=float)
    x = tau - params.noise_warden
    cdf = InterferenceCdf(interference_nu(params, strategy), params.pathloss_exp)
    out = np.ones(tau.shape)
    pos = x > 0
    if np.any(pos):
        out[pos] = 1.0 - np.atleast_1d(interference_cdf(cdf, x[pos], config))
    out = clamp_probability(out, "FA")
    return out


def md_probability(params: SystemParams, strategy: Strategy, tau, model: WardenModel | None = None):
    """Miss-detection probability ``P(S + I + N_w < tau)``."""
    model = model or WardenModel(params, strategy)
    return model.md(tau)


def md_probability_reference(params: SystemParams, strategy: Strategy, tau: float,
                             cdf=None, config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """MD with the warden distance as the *outer* integral and adaptive quadrature throughout.

    ``P(S + I < x) = E_r[ int_0^x (r^a/p) exp(-t r^a/p) F_I(x - t) dt ]``.
    ``cdf`` is the interference CDF ``F_I`` (defaults to the direct
    inversion). Slow; used to cross-check :class:`WardenModel`.
    """
    x = tau - params.noise_warden
    if x <= 0:
        return 0.0
    alpha, p = params.pathloss_exp, strategy.p_d
    if cdf is None:
        icdf = InterferenceCdf(interference_nu(params, strategy), alpha)
        cdf = lambda y: interference_cdf(icdf, y, config) if y > 0 else 0.0

    def inner(r):
        rate = r ** alpha / p
        # substitute t = x - y; the exp(-rate t) factor decays on the scale 1/rate
        f = lambda y: rate * math.exp(-rate * (x - y)) * cdf(y)
        brk = [x - k / rate for k in (1.0, 10.0, 40.0) if x - k / rate > 0]
        return adaptive(f, 0.0, x, config, points=brk)

    return clamp_probability(NearestWardenDistance(params.lambda_w).expect(inner, config), "MD")


def detection_error(params: SystemParams, strategy: Strategy, tau, model: WardenModel | None = None):
    model = model or WardenModel(params, strategy)
    return model.detection_error(tau)


def secure_comm_probability_from(p_md: float, p_so: float) -> float:
    return p_md + (1.0 - p_md) * (1.0 - p_so)


def secure_comm_probability(params: SystemParams, strategy: Strategy, tau, model: WardenModel | None = None):
    p_md = float(md_probability(params, strategy, tau, model))
    return secure_comm_probability_from(p_md, secrecy_outage_probability(params, strategy))


def jamming_cost(params: SystemParams, strategy: Strategy) -> float:
    return params.jamming_cost_ratio * params.cost_w_j * strategy.p_j


def utility_from(params: SystemParams, strategy: Strategy, p_success: float, p_secure: float) -> float:
    return float(params.reward_w_d * p_success * p_secure - jamming_cost(params, strategy))


def network_utility(params: SystemParams, strategy: Strategy, tau, model: WardenModel | None = None) -> float:
    return utility_from(params, strategy, success_probability(params, strategy),
                        secure_comm_probability(params, strategy, tau, model))


def evaluate_bundle(params: SystemParams, strategy: Strategy, tau: float,
                    model: WardenModel | None = None) -> ProbabilityBundle:
    """All derived probabilities and the utility at one ``(strategy, tau)`` point."""
    model = model or WardenModel(params, strategy)
    ps = success_probability(params, strategy)
    fa = float(model.fa(tau))
    md = float(model.md(tau))
    so = secrecy_outage_probability(params, strategy)
    sec = secure_comm_probability_from(md, so)
    return ProbabilityBundle(
        p_success=ps, p_fa=fa, p_md=md, p_secrecy_outage=so, p_secure=sec,
        detection_error=fa + md, utility=utility_from(params, strategy, ps, sec),
    )
