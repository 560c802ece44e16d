"""Leader/follower power control.

Lower stage: the warden picks the detection threshold minimising FA + MD.
Upper stage: the network picks (p_D, p_J) maximising utility subject to the
warden's minimal detection error staying above ``1 - eps``. The upper stage
is solved by successive convex approximation on normalised powers
``x = (p - p_min) / (p_max - p_min)`` and cross-checked by grid search.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal

from .analytic import (
    WardenModel,
    secrecy_outage_probability,
    secure_comm_probability_from,
    success_probability,
    utility_from,
)
from .model import ProbabilityBundle, Strategy, SystemParams, dbm_to_watt

log = logging.getLogger(__name__)

SCAN_POINTS = 64
# prominence below which two scan minima are treated as quadrature noise
TROUGH_SLACK = 1e-6
_MD_SATURATION = 0.999
# half-width (ratio) of the bracket tried around a threshold hint, about 2 dB
_HINT_SPAN = 1.6


class NonUnimodalWarning(UserWarning):
    pass


class InfeasibleSubproblem(RuntimeError):
    pass


class NoFeasiblePoint(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# lower stage


@dataclass(frozen=True)
class LowerStageResult:
    tau_star: float
    detection_error_at_star: float
    bracket: tuple
    scan_tau: np.ndarray = field(repr=False)
    scan_de: np.ndarray = field(repr=False)
    local_minima: int = 1


def count_local_minima(values, slack: float = TROUGH_SLACK) -> int:
    """Interior local minima of a sampled curve whose prominence exceeds ``slack``."""
    peaks, _ = signal.find_peaks(-np.asarray(values, dtype=float), prominence=slack)
    return len(peaks)


def _md_saturation_gap(model: WardenModel) -> float:
    """Smallest doubling of the natural power scale at which MD reaches 0.999."""
    x = max(model.c, model.nu ** (model.alpha / 2.0), 1e-300)
    for _ in range(400):
        if float(model.md(model.noise + x)) >= _MD_SATURATION:
            return x
        x *= 2.0
    raise RuntimeError("MD never saturates; check the parameters")


def detection_scan(params: SystemParams, strategy: Strategy, model: WardenModel | None = None,
                   points: int = SCAN_POINTS):
    """Log-spaced thresholds over ``[N, tau_max]`` and the detection error on them."""
    model = model or WardenModel(params, strategy)
    n = params.noise_warden
    x_max = _md_saturation_gap(model)
    lo = n if n > 0 else x_max * 1e-14
    tau = np.geomspace(lo, n + x_max, points)
    return tau, model.detection_error(tau)


def _refine(model: WardenModel, lo: float, hi: float, xtol: float):
    f = lambda u: float(model.detection_error(math.exp(u)))
    res = optimize.minimize_scalar(f, bounds=(math.log(lo), math.log(hi)), method="bounded",
                                   options={"xatol": xtol})
    return math.exp(res.x), float(res.fun)


def best_response_tau(params: SystemParams, strategy: Strategy, model: WardenModel | None = None,
                      points: int = SCAN_POINTS, xtol: float = 1e-8,
                      tau_hint: float | None = None) -> LowerStageResult:
    """Warden's detection threshold: coarse log scan, then bounded Brent refinement in ``log tau``.

    With ``tau_hint`` (the threshold of a nearby strategy) the scan is
    skipped when ``hint / 1.6, hint, hint * 1.6`` already bracket a minimum;
    ``local_minima`` is then ``None``.
    """
    model = model or WardenModel(params, strategy)
    if tau_hint is not None:
        lo, hi = tau_hint / _HINT_SPAN, tau_hint * _HINT_SPAN
        if lo > params.noise_warden:
            d = model.detection_error(np.array([lo, tau_hint, hi]))
            if d[1] < d[0] and d[1] < d[2]:
                t_star, d_star = _refine(model, lo, hi, xtol)
                return LowerStageResult(t_star, d_star, (lo, hi), np.array([lo, tau_hint, hi]), d, None)
    tau, de = detection_scan(params, strategy, model, points)
    n_min = count_local_minima(de)
    if n_min >= 2:
        warnings.warn(f"detection error has {n_min} separated minima at p_d={strategy.p_d:g}, "
                      f"p_j={strategy.p_j:g}; returning the deepest", NonUnimodalWarning, stacklevel=2)
    i = int(np.argmin(de))
    if de[i] >= 1.0 and i == 0:
        return LowerStageResult(float(tau[0]), float(de[0]), (float(tau[0]), float(tau[1])), tau, de, n_min)
    lo, hi = float(tau[max(i - 1, 0)]), float(tau[min(i + 1, len(tau) - 1)])
    t_star, d_star = _refine(model, lo, hi, xtol)
    if de[i] < d_star:
        t_star, d_star = float(tau[i]), float(de[i])
    return LowerStageResult(t_star, d_star, (lo, hi), tau, de, n_min)


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class PointEvaluation:
    strategy: Strategy
    lower: LowerStageResult
    bundle: ProbabilityBundle

    @property
    def tau_star(self):
        return self.lower.tau_star


def evaluate_point(params: SystemParams, strategy: Strategy, tau_hint: float | None = None) -> PointEvaluation:
    """Warden best response and every derived probability at that threshold."""
    model = WardenModel(params, strategy)
    lower = best_response_tau(params, strategy, model, tau_hint=tau_hint)
    tau = lower.tau_star
    ps = success_probability(params, strategy)
    fa, md = float(model.fa(tau)), float(model.md(tau))
    so = secrecy_outage_probability(params, strategy)
    sec = secure_comm_probability_from(md, so)
    bundle = ProbabilityBundle(ps, fa, md, so, sec, fa + md, utility_from(params, strategy, ps, sec))
    return PointEvaluation(strategy, lower, bundle)


def u0_from(bundle: ProbabilityBundle) -> float:
    return -bundle.utility


def u1_from(params: SystemParams, detection_error: float) -> float:
    return 1.0 - params.covertness_eps - detection_error


def u0(params: SystemParams, strategy: Strategy, tau_star: float) -> float:
    """Negative utility with the warden at ``tau_star``."""
    model = WardenModel(params, strategy)
    ps = success_probability(params, strategy)
    sec = secure_comm_probability_from(float(model.md(tau_star)), secrecy_outage_probability(params, strategy))
    return -utility_from(params, strategy, ps, sec)


def u1(params: SystemParams, strategy: Strategy, tau_star: float) -> float:
    """Covertness slack: ``<= 0`` iff the detection error at ``tau_star`` is at least ``1 - eps``."""
    return u1_from(params, float(WardenModel(params, strategy).detection_error(tau_star)))


# ---------------------------------------------------------------------------
# normalised coordinates and SCA pieces


@dataclass(frozen=True)
class PowerBox:
    """Map between the power box and ``[0, 1]^2``.

    ``log=True`` normalises dBm rather than watts on every axis whose lower
    bound is positive.
    """

    lo: np.ndarray
    hi: np.ndarray
    log: bool = False

    @classmethod
    def from_params(cls, params: SystemParams, log: bool = False) -> "PowerBox":
        return cls(np.array([params.p_d_min, params.p_j_min]), np.array([params.p_d_max, params.p_j_max]), log)

    @property
    def _log_axes(self):
        return np.full(2, self.log) & (self.lo > 0)

    def to_power(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        lin = self.lo + x * (self.hi - self.lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = self.lo * (self.hi / self.lo) ** x
        return np.where(self._log_axes, geo, lin)

    def to_strategy(self, x) -> Strategy:
        p = self.to_power(x)
        return Strategy(float(p[0]), float(p[1]))

    def to_unit(self, strategy: Strategy) -> np.ndarray:
        p = np.array([strategy.p_d, strategy.p_j])
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        lin = (p - self.lo) / span
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.hi > self.lo, np.log(self.hi / self.lo), 1.0)
            geo = np.log(p / self.lo) / ratio
        return np.clip(np.where(self._log_axes, geo, lin), 0.0, 1.0)


def numeric_gradient(f, x, step: float = 1e-4, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Second-order finite-difference gradient of ``f`` on the box ``[lo, hi]^n``.

    Central differences inside; three-point one-sided stencils where a
    central probe would leave the box.
    """
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        if x[i] - step < lo:
            g[i] = (-3 * f(x) + 4 * f(x + e) - f(x + 2 * e)) / (2 * step)
        elif x[i] + step > hi:
            g[i] = (3 * f(x) - 4 * f(x - e) + f(x - 2 * e)) / (2 * step)
        else:
            g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


@dataclass(frozen=True)
class Surrogate:
    """Strongly convex model ``U(xk) + g.(x - xk) + delta/2 |x - xk|^2``."""

    value: float
    gradient: np.ndarray
    anchor: np.ndarray
    delta: float

    def __call__(self, x):
        d = np.asarray(x, dtype=float) - self.anchor
        return self.value + float(self.gradient @ d) + 0.5 * self.delta * float(d @ d)

    def grad(self, x):
        return self.gradient + self.delta * (np.asarray(x, dtype=float) - self.anchor)

    @property
    def hessian(self):
        return self.delta * np.eye(self.anchor.size)


def build_surrogate(value, gradient, anchor, delta) -> Surrogate:
    if not delta > 0:
        raise ValueError("delta must be > 0")
    return Surrogate(float(value), np.asarray(gradient, dtype=float).copy(),
                     np.asarray(anchor, dtype=float).copy(), float(delta))


@dataclass(frozen=True)
class SubproblemSolution:
    x: np.ndarray
    multiplier: float
    active: bool


def solve_subproblem(s0: Surrogate, s1: Surrogate, lo=0.0, hi=1.0, iters: int = 80) -> SubproblemSolution:
    """Exact minimiser of ``s0`` subject to ``s1 <= 0`` and the box.

    With equal curvature the Lagrangian minimiser is a clamped prox step,
    ``x(t) = clip(xk - ((1 - t) g0 + t g1) / delta)`` with ``t = mu / (1 + mu)``;
    ``s1(x(t))`` is non-increasing in ``t``, so the active multiplier is found
    by bisection on ``t in [0, 1]``.
    """
    if not np.allclose(s0.anchor, s1.anchor) or s0.delta != s1.delta:
        raise ValueError("surrogates must share anchor and delta")
    xk, d = s0.anchor, s0.delta
    x_of = lambda t: np.clip(xk - ((1 - t) * s0.gradient + t * s1.gradient) / d, lo, hi)
    x0 = x_of(0.0)
    if s1(x0) <= 0:
        return SubproblemSolution(x0, 0.0, False)
    if s1(x_of(1.0)) > 0:
        raise InfeasibleSubproblem(f"surrogate constraint positive over the box (min {s1(x_of(1.0)):.3g})")
    a, b = 0.0, 1.0
    for _ in range(iters):
        m = 0.5 * (a + b)
        if s1(x_of(m)) > 0:
            a = m
        else:
            b = m
    mu = b / (1 - b) if b < 1 else math.inf
    return SubproblemSolution(x_of(b), mu, True)


def projected_gradient_residual(x, g0, g1, mu, lo=0.0, hi=1.0) -> float:
    """``|x - clip(x - (g0 + mu g1))|``; zero at a KKT point of the box-constrained problem."""
    g = g0 + mu * g1
    return float(np.linalg.norm(x - np.clip(x - g, lo, hi)))


def kkt_residual(x, g0, g1, u1_value, lo=0.0, hi=1.0, active_tol=1e-6) -> tuple:
    """Smallest projected-gradient residual over multipliers ``mu >= 0``.

    ``mu`` is pinned to zero unless the constraint is active within
    ``active_tol``. Returns ``(residual, mu)``.
    """
    if u1_value < -active_tol or not np.any(g1):
        return projected_gradient_residual(x, g0, g1, 0.0, lo, hi), 0.0
    # the residual is piecewise in mu; its kinks and zeros sit where a gradient component vanishes
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = -np.asarray(g0, dtype=float) / np.asarray(g1, dtype=float)
    cand = [0.0] + [float(m) for m in cand if np.isfinite(m) and m > 0]
    return min((projected_gradient_residual(x, g0, g1, m, lo, hi), m) for m in cand)


# ---------------------------------------------------------------------------
# SCA driver


@dataclass(frozen=True)
class ScaConfig:
    # proximal weight on normalised coordinates; utility differences along the
    # covertness boundary are O(1e-2), so a unit weight makes steps crawl
    prox_delta: float = 0.05
    gamma: float = 0.5
    tol: float = 1e-8
    max_iter: int = 200
    gradient_step: float = 1e-4
    restoration_iter: int = 50
    max_backtracks: int = 30
    # "log": normalise dBm; "linear": normalise watts
    coordinates: str = "log"

    def __post_init__(self):
        if not self.prox_delta > 0:
            raise ValueError("prox_delta must be > 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1 or not self.gradient_step > 0:
            raise ValueError("max_iter >= 1 and gradient_step > 0 required")
        if self.coordinates not in ("log", "linear"):
            raise ValueError("coordinates must be 'log' or 'linear'")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    p_d: float
    p_j: float
    u0: float
    u1: float
    step_error: float


@dataclass
class EquilibriumResult:
    strategy_star: Strategy | None
    tau_star: float | None
    bundle: ProbabilityBundle | None
    iterations: int
    trace: list
    converged: bool
    status: str
    kkt_residual: float = math.nan

    @property
    def utility(self) -> float:
        return self.bundle.utility if self.bundle is not None else -math.inf

    @property
    def feasible(self) -> bool:
        return self.bundle is not None


class _Objective:
    """Memoised evaluation of (U0, U1) in normalised coordinates."""

    def __init__(self, params: SystemParams, log_coordinates: bool = True):
        self.params = params
        self.box = PowerBox.from_params(params, log_coordinates)
        self._cache = {}

    def point(self, x, hint=None) -> PointEvaluation:
        key = tuple(np.round(np.asarray(x, dtype=float), 15))
        if key not in self._cache:
            self._cache[key] = evaluate_point(self.params, self.box.to_strategy(x), hint)
        return self._cache[key]

    def u0(self, x, hint=None):
        return u0_from(self.point(x, hint).bundle)

    def u1(self, x, hint=None):
        return u1_from(self.params, self.point(x, hint).bundle.detection_error)

    def gradients(self, x, step):
        """Finite-difference gradients of U0 and U1; probes reuse the centre's threshold as a hint."""
        hint = self.point(x).tau_star
        g0 = numeric_gradient(lambda y: self.u0(y, hint), x, step)
        g1 = numeric_gradient(lambda y: self.u1(y, hint), x, step)
        return g0, g1


def _restore_feasibility(obj: _Objective, config: ScaConfig, trace) -> np.ndarray:
    """Minimise U1 from the (p_d_min, p_j_max) corner until comfortably covert."""
    x = np.array([0.0, 1.0])
    target = -obj.params.covertness_eps / 10
    for k in range(config.restoration_iter):
        v = obj.u1(x)
        s = obj.box.to_strategy(x)
        trace.append(TraceRow(-(k + 1), s.p_d, s.p_j, obj.u0(x), v, math.nan))
        if v <= target:
            return x
        g = obj.gradients(x, config.gradient_step)[1]
        x = x + config.gamma * (np.clip(x - g / config.prox_delta, 0, 1) - x)
    if obj.u1(x) <= 0:
        return x
    raise NoFeasiblePoint(f"covertness unattainable: best detection-error slack {obj.u1(x):.3g} > 0")


def sca_solve(params: SystemParams, config: ScaConfig = ScaConfig(), initial: Strategy | None = None) -> EquilibriumResult:
    """Successive convex approximation on the leader's problem.

    Each iterate solves the proximal-linear subproblem exactly and moves a
    fraction ``gamma`` towards its solution. Once an iterate is covert, a
    step is only accepted if it stays covert and does not raise U0; otherwise
    it is halved. Stops when the squared normalised step falls below ``tol``.
    """
    obj = _Objective(params, config.coordinates == "log")
    box = obj.box
    trace = []
    x = box.to_unit(initial) if initial is not None else np.array([0.5, 0.5])
    x = np.clip(x, 0.0, 1.0)
    if obj.u1(x) > 0:
        log.info("initial point not covert; restoring feasibility")
        x = _restore_feasibility(obj, config, trace)

    converged, status, kkt, it = False, "max_iter_exceeded", math.nan, 0
    for it in range(1, config.max_iter + 1):
        v0, v1 = obj.u0(x), obj.u1(x)
        g0, g1 = obj.gradients(x, config.gradient_step)
        s0 = build_surrogate(v0, g0, x, config.prox_delta)
        s1 = build_surrogate(v1, g1, x, config.prox_delta)
        try:
            sub = solve_subproblem(s0, s1)
        except InfeasibleSubproblem:
            sub = SubproblemSolution(np.clip(x - g1 / config.prox_delta, 0, 1), math.inf, True)
        direction = sub.x - x
        err = float(config.gamma ** 2 * direction @ direction)
        s = box.to_strategy(x)
        trace.append(TraceRow(it, s.p_d, s.p_j, v0, v1, err))
        kkt, _ = kkt_residual(x, g0, g1, v1, active_tol=max(1e-6, 10 * math.sqrt(err)))
        if err < config.tol and v1 <= 0:
            converged, status = True, "converged"
            break
        step = config.gamma
        for _ in range(config.max_backtracks):
            cand = x + step * direction
            hint = obj.point(x).tau_star
            if v1 > 0 or (obj.u1(cand, hint) <= 0 and obj.u0(cand, hint) <= v0 + 1e-12):
                break
            step *= 0.5
        else:
            # no covert descent along the subproblem direction: stationary up to resolution
            converged, status = v1 <= 0, "converged" if v1 <= 0 else "stalled"
            break
        x = cand

    best = obj.point(x)
    if best.bundle.detection_error < 1 - params.covertness_eps - 1e-12:
        raise NoFeasiblePoint("SCA ended outside the covert region")
    return EquilibriumResult(best.strategy, best.tau_star, best.bundle, it, trace, converged, status, kkt)


def solve_equilibrium(params: SystemParams, config: ScaConfig = ScaConfig(), method: str = "sca",
                      grid_resolution: int = 9, initial: Strategy | None = None, mapper=map) -> EquilibriumResult:
    """Equilibrium by plain SCA or by a coarse grid followed by SCA from the best covert grid point.

    The ``"hybrid"`` method guards against the several local optima the
    unconstrained utility can have; since accepted SCA steps never lower
    the utility of a covert start, it is never worse than the grid.
    """
    if method == "sca":
        return sca_solve(params, config, initial)
    if method != "hybrid":
        raise ValueError(f"unknown method {method!r}")
    grid = exhaustive_search(params, grid_resolution, mapper)
    start = grid.strategy_star if grid.feasible else initial
    res = sca_solve(params, config, start)
    if grid.feasible and grid.utility > res.utility:
        grid.status, grid.trace = res.status, res.trace
        return grid
    return res


# ---------------------------------------------------------------------------
# grid search


def power_grid(p_min: float, p_max: float, n: int) -> np.ndarray:
    """``n`` powers uniform in dBm (linear if ``p_min`` is zero)."""
    if p_min > 0:
        return np.geomspace(p_min, p_max, n)
    return np.linspace(p_min, p_max, n)


@dataclass
class GridSurface:
    p_d: np.ndarray
    p_j: np.ndarray
    utility: np.ndarray
    detection_error: np.ndarray
    tau_star: np.ndarray
    points: list = field(repr=False)

    def feasible(self, eps: float) -> np.ndarray:
        return self.detection_error >= 1 - eps


def evaluate_grid(params: SystemParams, p_d_values, p_j_values, mapper=map) -> GridSurface:
    """Every grid point with its own warden best response; arrays are indexed ``[i_d, i_j]``."""
    p_d_values = np.asarray(p_d_values, dtype=float)
    p_j_values = np.asarray(p_j_values, dtype=float)
    strategies = [Strategy(float(a), float(b)) for a in p_d_values for b in p_j_values]
    points = list(mapper(lambda s: evaluate_point(params, s), strategies))
    shape = (len(p_d_values), len(p_j_values))
    util = np.array([p.bundle.utility for p in points]).reshape(shape)
    de = np.array([p.bundle.detection_error for p in points]).reshape(shape)
    tau = np.array([p.tau_star for p in points]).reshape(shape)
    return GridSurface(p_d_values, p_j_values, util, de, tau, points)


def best_feasible(params: SystemParams, surface: GridSurface) -> EquilibriumResult:
    """Best covert grid point; ties go to the lower p_j, then the lower p_d."""
    ok = surface.feasible(params.covertness_eps)
    if not ok.any():
        return EquilibriumResult(None, None, None, surface.utility.size, [], True, "infeasible")
    best = None
    for j in range(len(surface.p_j)):
        for i in range(len(surface.p_d)):
            if ok[i, j] and (best is None or surface.utility[i, j] > surface.utility[best]):
                best = (i, j)
    pt = surface.points[best[0] * len(surface.p_j) + best[1]]
    return EquilibriumResult(pt.strategy, pt.tau_star, pt.bundle, surface.utility.size, [], True, "grid_optimum")


def exhaustive_search(params: SystemParams, grid_resolution: int = 64, mapper=map) -> EquilibriumResult:
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    surface = evaluate_grid(params, power_grid(params.p_d_min, params.p_d_max, grid_resolution),
                            power_grid(params.p_j_min, params.p_j_max, grid_resolution), mapper)
    return best_feasible(params, surface)


def minimal_feasible_jamming(params: SystemParams, p_j_dbm_grid, p_d: float | None = None):
    """Smallest jamming power on the grid for which the warden's best detection error is ``>= 1 - eps``.

    The D2D power defaults to its minimum, where covertness is easiest.
    Returns ``(p_j, detection_error_at_p_j)`` or ``(None, None)``.
    """
    p_d = params.p_d_min if p_d is None else p_d
    for pj in dbm_to_watt(np.asarray(p_j_dbm_grid, dtype=float)):
        pe = evaluate_point(params, Strategy(p_d, float(pj)))
        if pe.bundle.detection_error >= 1 - params.covertness_eps:
            return float(pj), pe.bundle.detection_error
    return None, None


# ---------------------------------------------------------------------------
# one-dimensional leader problem (jamming power fixed)


def pd_candidates(params: SystemParams, p_j: float, grid_points: int = 61) -> list:
    """Evaluations of every D2D power on a dBm grid at fixed jamming power."""
    grid = power_grid(params.p_d_min, params.p_d_max, grid_points)
    return [evaluate_point(params, Strategy(float(pd), p_j)) for pd in grid]


def optimize_pd(params: SystemParams, p_j: float, covert: bool = True, grid_points: int = 61,
                candidates: list | None = None) -> PointEvaluation | None:
    """Best D2D power at fixed jamming power.

    ``covert=False`` drops the detection-error constraint (secrecy-only
    baseline). Grid in dBm (``candidates`` may be shared between the two
    variants), then bounded Brent refinement around the best point on the
    constraint-penalised objective. Returns ``None`` when no grid point is
    covert.
    """
    eps = params.covertness_eps
    evals = candidates if candidates is not None else pd_candidates(params, p_j, grid_points)
    grid = np.array([pe.strategy.p_d for pe in evals])

    def score(pe):
        if covert and pe.bundle.detection_error < 1 - eps:
            return -math.inf
        return pe.bundle.utility

    scores = np.array([score(pe) for pe in evals])
    if not np.isfinite(scores).any():
        return None
    i = int(np.argmax(scores))
    best = evals[i]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        log_space = params.p_d_min > 0
        to_p = math.exp if log_space else (lambda u: u)
        a, b = (math.log(lo), math.log(hi)) if log_space else (lo, hi)
        cache = {}

        def neg(u):
            pe = evaluate_point(params, Strategy(to_p(u), p_j), best.tau_star)
            cache[u] = pe
            s = score(pe)
            return -s if np.isfinite(s) else 1e3
        res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": 1e-4})
        cand = cache.get(res.x)
        if cand is not None and score(cand) > score(best):
            best = cand
    return best
