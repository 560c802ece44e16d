"""Experiment runners behind the CLI subcommands.

Each runner returns result rows (see :mod:`.output`) plus whatever summary
the caller needs for its exit status; none of them touch the filesystem.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .. import analytic
from ..game import (
    NoFeasiblePoint,
    ScaConfig,
    best_feasible,
    evaluate_grid,
    exhaustive_search,
    optimize_pd,
    pd_candidates,
    power_grid,
    sca_solve,
    solve_equilibrium,
)
from ..model import Strategy, SystemParams, db_to_linear, dbm_to_watt
from ..simulator import (
    McConfig,
    draw_aggregates,
    estimate_fa_md,
    estimate_secrecy_outage,
    estimate_success_probability,
)
from .output import make_row

log = logging.getLogger(__name__)

AGREEMENT_SIGMAS = 3.0
AGREEMENT_FLOOR = 0.01
DIVERGENCE_TOL = 0.01


def agrees(analytic_value: float, mc_mean: float, mc_se: float) -> bool:
    return abs(analytic_value - mc_mean) <= max(AGREEMENT_SIGMAS * mc_se, AGREEMENT_FLOOR)


def default_tau_dbm():
    return list(np.linspace(-20.0, 30.0, 13))


# ---------------------------------------------------------------------------
# analytic vs Monte Carlo


@dataclass
class ValidationSummary:
    rows: list
    checked: int
    failed: int

    @property
    def passed(self) -> bool:
        return self.failed == 0


def run_validation(params: SystemParams, mc: McConfig, p_d_dbm, p_j_dbm, tau_dbm=None,
                   quantities=("success", "fa", "md", "secrecy_outage"), sample=None) -> ValidationSummary:
    """Pair every analytic probability with its Monte Carlo estimate on one shared sample."""
    tau_dbm = default_tau_dbm() if tau_dbm is None else list(tau_dbm)
    strategies = [Strategy.from_dbm(d, j) for j in p_j_dbm for d in p_d_dbm]
    mc.check_region(params, strategies)
    t0 = time.perf_counter()
    agg = sample if sample is not None else draw_aggregates(params, mc)
    log.info("drew %d Monte Carlo trials in %.1f s", agg.trials, time.perf_counter() - t0)
    taus = dbm_to_watt(np.asarray(tau_dbm, dtype=float))
    rows, failed, checked = [], 0, 0

    def add(quantity, st, a, est, tau=None):
        nonlocal failed, checked
        ok = agrees(a, est.mean, est.std_error)
        checked += 1
        failed += not ok
        rows.append(make_row("validate", params, quantity=quantity, strategy=st, tau=tau, analytic=a,
                             mc_mean=est.mean, mc_std_error=est.std_error, mc_trials=est.trials,
                             verdict="pass" if ok else "fail"))

    for st in strategies:
        if "success" in quantities:
            add("success", st, analytic.success_probability(params, st),
                estimate_success_probability(params, st, mc, agg))
        if "secrecy_outage" in quantities:
            add("secrecy_outage", st, analytic.secrecy_outage_probability(params, st),
                estimate_secrecy_outage(params, st, mc, agg))
        if "fa" in quantities or "md" in quantities:
            est = estimate_fa_md(params, st, taus, mc, agg)
            fa = analytic.fa_probability(params, st, taus) if "fa" in quantities else None
            md = analytic.md_probability(params, st, taus) if "md" in quantities else None
            for k, tau in enumerate(taus):
                if fa is not None:
                    add("fa", st, float(fa[k]), est[k][0], float(tau))
                if md is not None:
                    add("md", st, float(md[k]), est[k][1], float(tau))
    return ValidationSummary(rows, checked, failed)


# ---------------------------------------------------------------------------
# utility / detection-error surface


@dataclass
class SurfaceSummary:
    rows: list
    surface: object
    best: object


def run_surface(params: SystemParams, grid: int = 33, mapper=map) -> SurfaceSummary:
    pd = power_grid(params.p_d_min, params.p_d_max, grid)
    pj = power_grid(params.p_j_min, params.p_j_max, grid)
    if grid == 1:
        pd, pj = pd[:1], pj[:1]
    surf = evaluate_grid(params, pd, pj, mapper)
    best = best_feasible(params, surf)
    ok = surf.feasible(params.covertness_eps)
    rows = []
    for i in range(len(pd)):
        for j in range(len(pj)):
            pt = surf.points[i * len(pj) + j]
            is_best = best.feasible and pt.strategy == best.strategy_star
            rows.append(make_row("surface", params, quantity="grid_point", strategy=pt.strategy,
                                 tau_star=pt.tau_star, bundle=pt.bundle, feasible=bool(ok[i, j]),
                                 status="best" if is_best else ""))
    return SurfaceSummary(rows, surf, best)


# ---------------------------------------------------------------------------
# equilibrium


@dataclass
class EquilibriumSummary:
    rows: list
    sca: object
    grid: object
    diverged: bool


def run_equilibrium(params: SystemParams, sca: ScaConfig, grid: int = 33, mapper=map) -> EquilibriumSummary:
    rows = []
    t0 = time.perf_counter()
    try:
        res = sca_solve(params, sca)
    except NoFeasiblePoint as exc:
        log.warning("SCA: %s", exc)
        res = None
        rows.append(make_row("equilibrium", params, quantity="sca", status="no_feasible_point",
                             wall_time=time.perf_counter() - t0))
    if res is not None:
        for tr in res.trace:
            rows.append(make_row("equilibrium", params, quantity="sca_trace", p_d=tr.p_d, p_j=tr.p_j,
                                 u0=tr.u0, u1=tr.u1, step_error=tr.step_error, iteration=tr.iteration,
                                 status="restoration" if tr.iteration < 0 else ""))
        rows.append(make_row("equilibrium", params, quantity="sca", strategy=res.strategy_star,
                             tau_star=res.tau_star, bundle=res.bundle, feasible=True,
                             iteration=res.iterations, status=res.status, wall_time=time.perf_counter() - t0))
    t1 = time.perf_counter()
    ex = exhaustive_search(params, grid, mapper)
    rows.append(make_row("equilibrium", params, quantity="exhaustive", strategy=ex.strategy_star,
                         tau_star=ex.tau_star, bundle=ex.bundle, feasible=ex.feasible,
                         iteration=ex.iterations, status=ex.status, wall_time=time.perf_counter() - t1))
    diverged = False
    if res is not None and ex.feasible:
        gap = abs(res.utility - ex.utility)
        diverged = gap > DIVERGENCE_TOL * max(abs(ex.utility), 1e-12)
        rows.append(make_row("equilibrium", params, quantity="divergence", analytic=gap,
                             verdict="fail" if diverged else "pass"))
    elif (res is None) != (not ex.feasible):
        # one method found a covert point and the other did not
        diverged = res is None and ex.feasible
        rows.append(make_row("equilibrium", params, quantity="divergence",
                             verdict="fail" if diverged else "pass",
                             status="sca_only" if res is not None else "grid_only"))
    return EquilibriumSummary(rows, res, ex, diverged)


# ---------------------------------------------------------------------------
# covert approach vs secrecy-only baseline


@dataclass
class ComparisonPoint:
    ratio_db: float
    p_j: float
    covert: object
    secrecy: object


def compare_point(params: SystemParams, ratio_db: float, pd_points: int = 61) -> ComparisonPoint:
    pj = params.p_j_max * float(db_to_linear(ratio_db))
    cands = pd_candidates(params, pj, pd_points)
    return ComparisonPoint(ratio_db, pj, optimize_pd(params, pj, True, candidates=cands),
                           optimize_pd(params, pj, False, candidates=cands))


def run_compare_secrecy(params: SystemParams, ratios_db, pd_points: int = 61, mapper=map):
    """Optimise p_d at each jamming level for both approaches.

    Where no covert D2D power exists the covert network stays silent and its
    utility is reported as zero.
    """
    points = list(mapper(lambda r: compare_point(params, r, pd_points), list(ratios_db)))
    rows = []
    for cp in points:
        if cp.covert is None:
            rows.append(make_row("compare-secrecy", params, quantity="covert", sweep_name="p_j_ratio_db",
                                 sweep_value=cp.ratio_db, p_j=cp.p_j, utility=0.0, feasible=False,
                                 status="silent"))
        else:
            rows.append(make_row("compare-secrecy", params, quantity="covert", sweep_name="p_j_ratio_db",
                                 sweep_value=cp.ratio_db, strategy=cp.covert.strategy,
                                 tau_star=cp.covert.tau_star, bundle=cp.covert.bundle, feasible=True))
        s = cp.secrecy
        rows.append(make_row("compare-secrecy", params, quantity="secrecy", sweep_name="p_j_ratio_db",
                             sweep_value=cp.ratio_db, strategy=s.strategy, tau_star=s.tau_star,
                             bundle=s.bundle, feasible=s.bundle.detection_error >= 1 - params.covertness_eps))
    return rows, points


# ---------------------------------------------------------------------------
# parameter sweeps

PRESETS = {
    "warden-density": dict(name="lambda_w", values="0.002,0.005,0.01,0.02,0.05",
                           level_name="covertness_eps", levels="0.01,0.05,0.1"),
    "jammer-density": dict(name="lambda_j", values="0.02,0.05,0.1,0.2,0.3",
                           level_name="lambda_d", levels="0.1,0.2"),
    "warden-threshold": dict(name="sinr_thresh_warden_db", values="-30:0:5",
                             level_name="sinr_thresh_d2d_db", levels="-10,-5"),
}


def _field_and_unit(name: str):
    fields = set(SystemParams.field_names())
    if name in fields:
        return name, lambda v: v
    if name.endswith("_dbm") and name[:-4] in fields:
        return name[:-4], lambda v: float(dbm_to_watt(v))
    if name.endswith("_db") and name[:-3] in fields:
        return name[:-3], lambda v: float(db_to_linear(v))
    raise ValueError(f"{name!r} is not a model parameter (optionally suffixed _db/_dbm)")


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter, an optional level parameter, and how to solve each point."""

    name: str
    values: tuple
    level_name: str | None = None
    levels: tuple = (None,)
    mode: str = "analytic"
    method: str = "hybrid"
    grid: int = 9

    def __post_init__(self):
        _field_and_unit(self.name)
        if self.level_name is not None:
            _field_and_unit(self.level_name)
        for label, grid in (("values", self.values), ("levels", self.levels)):
            if not grid:
                raise ValueError(f"sweep {label} must be non-empty")
        if list(self.values) != sorted(self.values):
            raise ValueError("sweep values must be sorted")
        if self.mode not in ("analytic", "monte-carlo", "both"):
            raise ValueError("mode must be analytic, monte-carlo or both")

    def params_at(self, base: SystemParams, value, level) -> SystemParams:
        field, conv = _field_and_unit(self.name)
        changes = {field: conv(value)}
        if self.level_name is not None:
            lf, lconv = _field_and_unit(self.level_name)
            changes[lf] = lconv(level)
        return base.with_(**changes)


def _mc_check_rows(params, res, mc, common):
    """Monte Carlo estimates of the equilibrium's success, MD and secrecy-outage probabilities."""
    agg = draw_aggregates(params, mc)
    st, b = res.strategy_star, res.bundle
    md = estimate_fa_md(params, st, [res.tau_star], mc, agg)[0][1]
    pairs = [("success", b.p_success, estimate_success_probability(params, st, mc, agg)),
             ("md", b.p_md, md),
             ("secrecy_outage", b.p_secrecy_outage, estimate_secrecy_outage(params, st, mc, agg))]
    out = []
    for q, a, est in pairs:
        row = dict(common, quantity=f"mc_{q}")
        out.append(make_row("sweep", params, strategy=st, tau=res.tau_star, analytic=a, mc_mean=est.mean,
                            mc_std_error=est.std_error, mc_trials=est.trials,
                            verdict="pass" if agrees(a, est.mean, est.std_error) else "fail", **row))
    return out


def run_sweep(base: SystemParams, spec: SweepSpec, sca: ScaConfig, mc: McConfig | None = None, mapper=map):
    """Re-solve the equilibrium at every (level, value) pair; rows come back in input order."""
    jobs = [(lv, v) for lv in spec.levels for v in spec.values]

    def solve(job):
        lv, v = job
        p = spec.params_at(base, v, lv)
        t0 = time.perf_counter()
        try:
            res = solve_equilibrium(p, sca, spec.method, spec.grid, mapper=map)
        except NoFeasiblePoint:
            res = None
        return p, res, time.perf_counter() - t0

    rows, curves = [], {}
    for (lv, v), (p, res, wall) in zip(jobs, mapper(solve, jobs)):
        common = dict(quantity="equilibrium", sweep_name=spec.name, sweep_value=v,
                      level_name=spec.level_name, level=lv, wall_time=wall)
        if res is None:
            rows.append(make_row("sweep", p, feasible=False, status="no_feasible_point", **common))
            curves.setdefault(lv, []).append((v, math.nan))
            continue
        rows.append(make_row("sweep", p, strategy=res.strategy_star, tau_star=res.tau_star, bundle=res.bundle,
                             feasible=True, iteration=res.iterations, status=res.status, **common))
        curves.setdefault(lv, []).append((v, res.utility))
        if spec.mode != "analytic" and mc is not None:
            rows.extend(_mc_check_rows(p, res, mc, common))
    return rows, curves

