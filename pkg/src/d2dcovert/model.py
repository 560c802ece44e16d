"""Parameter containers, unit conversion and validation.

Everything inside the package works in linear units (watts, ratios,
1/m^2). dBm and dB only appear at the I/O boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np


class ParameterError(ValueError):
    """Raised by :func:`validate`; ``problems`` lists every violated invariant."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{kind}: {msg}" for kind, msg in self.problems))

    @property
    def kinds(self):
        return {kind for kind, _ in self.problems}


class DomainError(ValueError):
    pass


def dbm_to_watt(x):
    return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p):
    return 10.0 * np.log10(p) + 30.0


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(r):
    return 10.0 * np.log10(r)


@dataclass(frozen=True)
class SystemParams:
    """Network, channel and economic constants (linear units).

    Defaults reproduce the parameter table of the reference setting:
    densities 0.1 / 0.01 / 0.1 per m^2, ALOHA activation 0.5, link distance
    1 m, path-loss exponent 4, SINR thresholds -10 dB, noise -90 dBm,
    covertness level 0.01, unit reward and unit jamming cost, and both
    powers in [0, 30] dBm.
    """

    lambda_d: float = 0.1
    lambda_w: float = 0.01
    lambda_j: float = 0.1
    p_active: float = 0.5
    link_distance: float = 1.0
    pathloss_exp: float = 4.0
    noise_rx: float = 1e-12
    noise_warden: float = 1e-12
    sinr_thresh_d2d: float = 0.1
    sinr_thresh_warden: float = 0.1
    covertness_eps: float = 0.01
    reward_w_d: float = 1.0
    cost_w_j: float = 1.0
    p_d_min: float = 1e-3
    p_d_max: float = 1.0
    p_j_min: float = 1e-3
    p_j_max: float = 1.0

    @property
    def p_inactive(self) -> float:
        return 1.0 - self.p_active

    @property
    def sinc_factor(self) -> float:
        """pi / sinc(2/alpha), the constant shared by every PGFL exponent."""
        return math.pi / float(np.sinc(2.0 / self.pathloss_exp))

    @property
    def jamming_cost_ratio(self) -> float:
        return self.lambda_j / self.lambda_d

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Strategy:
    """Leader's decision: D2D transmit power and jamming power, watts."""

    p_d: float
    p_j: float

    @classmethod
    def from_dbm(cls, p_d_dbm: float, p_j_dbm: float) -> "Strategy":
        return cls(dbm_to_watt(p_d_dbm), dbm_to_watt(p_j_dbm))

    @property
    def dbm(self):
        return watt_to_dbm(self.p_d), watt_to_dbm(self.p_j)

    def in_box(self, params: SystemParams, rtol: float = 1e-12) -> bool:
        lo_d, hi_d = params.p_d_min * (1 - rtol), params.p_d_max * (1 + rtol)
        lo_j, hi_j = params.p_j_min * (1 - rtol), params.p_j_max * (1 + rtol)
        return lo_d <= self.p_d <= hi_d and lo_j <= self.p_j <= hi_j


@dataclass(frozen=True)
class ProbabilityBundle:
    p_success: float
    p_fa: float
    p_md: float
    p_secrecy_outage: float
    p_secure: float
    detection_error: float
    utility: float


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged if every invariant holds.

    Raises :class:`ParameterError` listing *all* violations otherwise.
    """
    problems = []
    for name in ("lambda_d", "lambda_w", "lambda_j"):
        v = getattr(params, name)
        if not (np.isfinite(v) and v > 0):
            problems.append(("NonPositiveDensity", f"{name}={v!r} must be > 0"))
    if not (np.isfinite(params.pathloss_exp) and params.pathloss_exp > 2):
        problems.append(("PathlossTooSmall", f"pathloss_exp={params.pathloss_exp!r} must be > 2"))
    if not (0 < params.p_active <= 1):
        problems.append(("BadProbability", f"p_active={params.p_active!r} not in (0, 1]"))
    if not (0 < params.covertness_eps < 1):
        problems.append(("BadProbability", f"covertness_eps={params.covertness_eps!r} not in (0, 1)"))
    for lo, hi in (("p_d_min", "p_d_max"), ("p_j_min", "p_j_max")):
        a, b = getattr(params, lo), getattr(params, hi)
        if not (0 <= a <= b):
            problems.append(("EmptyPowerBox", f"need 0 <= {lo}={a!r} <= {hi}={b!r}"))
    for name in ("link_distance", "sinr_thresh_d2d", "sinr_thresh_warden"):
        v = getattr(params, name)
        if not (np.isfinite(v) and v > 0):
            problems.append(("NonPositiveValue", f"{name}={v!r} must be > 0"))
    for name in ("noise_rx", "noise_warden", "reward_w_d", "cost_w_j"):
        v = getattr(params, name)
        if not (np.isfinite(v) and v >= 0):
            problems.append(("NegativeValue", f"{name}={v!r} must be >= 0"))
    if problems:
        raise ParameterError(problems)
    return params
