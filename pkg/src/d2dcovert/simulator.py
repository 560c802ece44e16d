"""Monte Carlo oracle for the link and warden probabilities.

Geometry of one trial: the typical receiver sits at the origin and its
transmitter at distance ``R`` in a uniformly random direction. Other D2D
transmitters, jammers and wardens are homogeneous PPPs on a disc of radius
``region_radius`` centred on the typical transmitter. The warden that
matters is the one nearest to the typical transmitter.

Every received power is linear in ``p_D`` and ``p_J``, so each trial is
reduced to a handful of unit-power aggregates (:class:`TrialAggregates`)
and any number of strategies and thresholds is then evaluated on the same
draws.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import Strategy, SystemParams

log = logging.getLogger(__name__)

# tail interference beyond the disc, relative to the interference scale nu^(alpha/2)
_REGION_TOL = 1e-2
# quantile of the nearest-warden distance used when sizing the disc
_WARDEN_QUANTILE = 0.9999


@dataclass(frozen=True)
class McConfig:
    trials: int = 100_000
    region_radius: float = 50.0
    base_seed: int = 20240601
    batch_size: int = 4096
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.region_radius > 0:
            raise ValueError("region_radius must be > 0")
        if self.batch_size < 1 or self.workers < 1:
            raise ValueError("batch_size and workers must be >= 1")

    def region_error(self, params: SystemParams, strategy: Strategy) -> float:
        """Mean interference from outside the disc relative to the interference scale.

        The observation point farthest from the centre is the nearest warden,
        taken at its 99.99% distance quantile; everything beyond the remaining
        radius ``rho`` contributes ``2 pi lam p rho^(2-alpha) / (alpha-2)`` in mean.
        """
        alpha = params.pathloss_exp
        r_w = math.sqrt(-math.log(1 - _WARDEN_QUANTILE) / (math.pi * params.lambda_w)) if params.lambda_w > 0 else 0.0
        rho = self.region_radius - max(r_w, params.link_distance)
        if rho <= 0:
            return math.inf
        load = params.lambda_d * params.p_active * strategy.p_d + params.lambda_j * strategy.p_j
        tail = 2 * math.pi * load * rho ** (2 - alpha) / (alpha - 2)
        a = 2.0 / alpha
        nu = params.sinc_factor * (params.lambda_d * params.p_active * strategy.p_d ** a
                                   + params.lambda_j * strategy.p_j ** a)
        scale = nu ** (alpha / 2)
        return tail / scale if scale > 0 else 0.0

    def check_region(self, params: SystemParams, strategies) -> None:
        worst = max(self.region_error(params, s) for s in strategies)
        if worst > _REGION_TOL:
            raise ValueError(
                f"region_radius={self.region_radius} too small: truncated interference is "
                f"{worst:.2e} of its natural scale (limit {_REGION_TOL})"
            )


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int

    @classmethod
    def bernoulli(cls, hits: int, trials: int) -> "McEstimate":
        m = hits / trials
        return cls(m, math.sqrt(m * (1 - m) / trials), trials)


@dataclass
class NetworkRealization:
    """One sampled network. Positions are complex numbers (x + iy), metres."""

    tx: complex
    g_d: float
    d2d_points: np.ndarray
    d2d_active: np.ndarray
    d2d_fade_rx: np.ndarray
    d2d_fade_w: np.ndarray
    jammer_points: np.ndarray
    jammer_fade_rx: np.ndarray
    jammer_fade_w: np.ndarray
    warden_points: np.ndarray
    nearest_warden: int
    r_dw: float
    g_dw: float
    warden_resamples: int = 0


@dataclass
class TrialAggregates:
    """Per-trial sums at unit transmit power; arrays over trials.

    ``rx_d2d``/``rx_jam``: interference at the typical receiver from active
    D2D transmitters / jammers; ``w_d2d``/``w_jam``: the same at the nearest
    warden; ``g_d``: typical-link fade; ``r_dw``, ``g_dw``: distance and fade
    from the typical transmitter to the nearest warden.
    """

    rx_d2d: np.ndarray
    rx_jam: np.ndarray
    w_d2d: np.ndarray
    w_jam: np.ndarray
    g_d: np.ndarray
    r_dw: np.ndarray
    g_dw: np.ndarray
    warden_resamples: int

    @property
    def trials(self) -> int:
        return len(self.g_d)


def _uniform_disc(rng, n, radius, centre):
    r = radius * np.sqrt(rng.random(n))
    phi = 2 * math.pi * rng.random(n)
    return centre + r * np.exp(1j * phi)


def sample_realization(params: SystemParams, config: McConfig, trial_index: int) -> NetworkRealization:
    """Draw trial ``trial_index``; the generator is seeded by ``(base_seed, trial_index)``."""
    rng = np.random.default_rng([config.base_seed, trial_index])
    R, rad = params.link_distance, config.region_radius
    area = math.pi * rad * rad
    tx = R * complex(np.exp(2j * math.pi * rng.random()))
    g_d = rng.exponential()

    n_d = rng.poisson(params.lambda_d * area)
    d2d = _uniform_disc(rng, n_d, rad, tx)
    active = rng.random(n_d) < params.p_active
    d2d_fade_rx = rng.exponential(size=n_d)
    d2d_fade_w = rng.exponential(size=n_d)

    n_j = rng.poisson(params.lambda_j * area)
    jam = _uniform_disc(rng, n_j, rad, tx)
    jam_fade_rx = rng.exponential(size=n_j)
    jam_fade_w = rng.exponential(size=n_j)

    resamples = 0
    wardens = np.empty(0, dtype=complex)
    if params.lambda_w > 0:
        while True:
            wardens = _uniform_disc(rng, rng.poisson(params.lambda_w * area), rad, tx)
            if len(wardens):
                break
            resamples += 1
    if len(wardens):
        dist = np.abs(wardens - tx)
        k = int(np.argmin(dist))
        r_dw = float(dist[k])
    else:
        k, r_dw = -1, math.inf
    g_dw = rng.exponential()
    return NetworkRealization(tx, g_d, d2d, active, d2d_fade_rx, d2d_fade_w, jam, jam_fade_rx,
                              jam_fade_w, wardens, k, r_dw, g_dw, resamples)


def reduce_realization(real: NetworkRealization, alpha: float):
    """Unit-power aggregates of one realization, in :class:`TrialAggregates` field order."""
    act = real.d2d_points[real.d2d_active]
    rx_d2d = np.sum(real.d2d_fade_rx[real.d2d_active] * np.abs(act) ** -alpha)
    rx_jam = np.sum(real.jammer_fade_rx * np.abs(real.jammer_points) ** -alpha)
    if real.nearest_warden >= 0:
        w = real.warden_points[real.nearest_warden]
        w_d2d = np.sum(real.d2d_fade_w[real.d2d_active] * np.abs(act - w) ** -alpha)
        w_jam = np.sum(real.jammer_fade_w * np.abs(real.jammer_points - w) ** -alpha)
    else:
        w_d2d = w_jam = 0.0
    return rx_d2d, rx_jam, w_d2d, w_jam, real.g_d, real.r_dw, real.g_dw, real.warden_resamples


def _run_range(params, config, start, stop):
    rows = [reduce_realization(sample_realization(params, config, i), params.pathloss_exp)
            for i in range(start, stop)]
    return np.array(rows, dtype=float).reshape(-1, 8)


def draw_aggregates(params: SystemParams, config: McConfig) -> TrialAggregates:
    """Sample all trials and reduce them. Output is independent of batching and workers."""
    bounds = [(s, min(s + config.batch_size, config.trials)) for s in range(0, config.trials, config.batch_size)]
    if config.workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(lambda b: _run_range(params, config, *b), bounds))
    else:
        parts = [_run_range(params, config, *b) for b in bounds]
    data = np.concatenate(parts, axis=0)
    resamples = int(data[:, 7].sum())
    if resamples:
        log.info("resampled empty warden layer %d times over %d trials", resamples, config.trials)
    return TrialAggregates(*(data[:, k].copy() for k in range(7)), warden_resamples=resamples)


def _aggregates(params, config, sample):
    return sample if sample is not None else draw_aggregates(params, config)


# ---------------------------------------------------------------------------
# estimators


def success_indicator(params: SystemParams, strategy: Strategy, agg: TrialAggregates) -> np.ndarray:
    sig = strategy.p_d * agg.g_d * params.link_distance ** -params.pathloss_exp
    den = params.noise_rx + strategy.p_d * agg.rx_d2d + strategy.p_j * agg.rx_jam
    return sig > params.sinr_thresh_d2d * den


def warden_interference(strategy: Strategy, agg: TrialAggregates) -> np.ndarray:
    return strategy.p_d * agg.w_d2d + strategy.p_j * agg.w_jam


def warden_signal(params: SystemParams, strategy: Strategy, agg: TrialAggregates) -> np.ndarray:
    return strategy.p_d * agg.g_dw * agg.r_dw ** -params.pathloss_exp


def estimate_success_probability(params: SystemParams, strategy: Strategy, config: McConfig,
                                 sample: TrialAggregates | None = None) -> McEstimate:
    agg = _aggregates(params, config, sample)
    return McEstimate.bernoulli(int(np.count_nonzero(success_indicator(params, strategy, agg))), agg.trials)


def estimate_fa_md(params: SystemParams, strategy: Strategy, tau_grid, config: McConfig,
                   sample: TrialAggregates | None = None):
    """Per-threshold (FA, MD) estimates.

    FA: no transmission, the warden sees interference plus noise above ``tau``.
    MD: the typical transmitter is on, the total stays below ``tau``.
    """
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(tau_grid) < 0):
        raise ValueError("tau grid must be sorted")
    agg = _aggregates(params, config, sample)
    received = params.noise_warden + warden_interference(strategy, agg)
    h0 = np.sort(received)
    h1 = np.sort(received + warden_signal(params, strategy, agg))
    n = agg.trials
    fa_hits = n - np.searchsorted(h0, tau_grid, side="right")
    md_hits = np.searchsorted(h1, tau_grid, side="left")
    return [(McEstimate.bernoulli(int(f), n), McEstimate.bernoulli(int(m), n)) for f, m in zip(fa_hits, md_hits)]


def estimate_secrecy_outage(params: SystemParams, strategy: Strategy, config: McConfig,
                            sample: TrialAggregates | None = None) -> McEstimate:
    agg = _aggregates(params, config, sample)
    den = params.noise_warden + warden_interference(strategy, agg)
    hits = warden_signal(params, strategy, agg) > params.sinr_thresh_warden * den
    return McEstimate.bernoulli(int(np.count_nonzero(hits)), agg.trials)


def empirical_interference_cdf(strategy: Strategy, agg: TrialAggregates, t) -> np.ndarray:
    """Fraction of trials whose warden-side interference is <= t."""
    i = np.sort(warden_interference(strategy, agg))
    return np.searchsorted(i, np.asarray(t, dtype=float), side="right") / agg.trials
