"""End-to-end acceptance criteria at the default parameters.

Each test records one pass/fail line, printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfc

from d2dcovert import Strategy, SystemParams
from d2dcovert.analytic import WardenModel, evaluate_bundle, signal_table
from d2dcovert.game import (
    NoFeasiblePoint,
    ScaConfig,
    best_response_tau,
    build_surrogate,
    count_local_minima,
    detection_scan,
    evaluate_point,
    exhaustive_search,
    minimal_feasible_jamming,
    optimize_pd,
    sca_solve,
)
from d2dcovert.harness import experiments as ex
from d2dcovert.harness.config import parse_grid
from d2dcovert.interference import InterferenceCdf, interference_cdf, stable_cdf_table
from d2dcovert.simulator import McConfig

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def covert_equilibrium(defaults):
    return sca_solve(defaults)


def test_1_analytic_matches_monte_carlo(defaults, default_sample, verdict):
    t0 = time.perf_counter()
    summary = ex.run_validation(defaults, McConfig(trials=100_000), list(range(0, 31, 5)), [0, 15, 30],
                                ex.default_tau_dbm(), sample=default_sample)
    worst = {}
    for r in summary.rows:
        gap = abs(r["analytic"] - r["mc_mean"]) / max(3 * r["mc_std_error"], 0.01)
        worst[r["quantity"]] = max(worst.get(r["quantity"], 0.0), gap)
    detail = (f"{summary.checked - summary.failed}/{summary.checked} points within max(3 SE, 0.01); worst gap/limit "
              + ", ".join(f"{q}={v:.2f}" for q, v in sorted(worst.items()))
              + f"; {time.perf_counter() - t0:.0f} s after sampling")
    assert summary.checked == 21 * (2 + 2 * 13)
    assert verdict(1, "analytic vs Monte Carlo", summary.passed, detail)


def test_2_bromwich_erfc_oracle(defaults, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    t = np.geomspace(1e-9, 1.0, 50)
    worst = 0.0
    for pd_dbm, pj_dbm in rng.uniform(0.0, 30.0, size=(5, 2)):
        cdf = InterferenceCdf.from_model(defaults, Strategy.from_dbm(pd_dbm, pj_dbm))
        got = interference_cdf(cdf, t)
        worst = max(worst, float(np.max(np.abs(got - erfc(cdf.nu / (2 * np.sqrt(t)))))))
    elapsed = time.perf_counter() - t0
    assert verdict(2, "Bromwich inversion vs erfc", worst < 1e-6 and elapsed < 10,
                   f"max |diff| {worst:.2e}, {elapsed:.2f} s")


def test_3_detection_error_trough(defaults, verdict):
    rng = np.random.default_rng(3)
    counts, worst_de, misplaced = [], 0.0, 0
    for pd_dbm, pj_dbm in rng.uniform(0.0, 30.0, size=(20, 2)):
        s = Strategy.from_dbm(pd_dbm, pj_dbm)
        model = WardenModel(defaults, s)
        tau, de = detection_scan(defaults, s, model, 64)
        counts.append(count_local_minima(de, slack=1e-4))
        res = best_response_tau(defaults, s, model)
        worst_de = max(worst_de, res.detection_error_at_star)
        i = int(np.argmin(de))
        if not (tau[max(i - 1, 0)] <= res.tau_star <= tau[min(i + 1, 63)]) or res.detection_error_at_star > de[i]:
            misplaced += 1
    ok = all(c == 1 for c in counts) and worst_de <= 1.0 and misplaced == 0
    assert verdict(3, "single detection-error trough", ok,
                   f"minima per scan {sorted(set(counts))}, max DE* {worst_de:.4f}, misplaced {misplaced}")


def test_4_sca_matches_exhaustive(defaults, covert_equilibrium, verdict):
    t0 = time.perf_counter()
    grid = exhaustive_search(defaults, 64)
    sca = covert_equilibrium
    gap = abs(sca.utility - grid.utility) / abs(grid.utility)
    detail = (f"SCA {sca.utility:.5f} at {np.round(sca.strategy_star.dbm, 2)} dBm ({sca.status}, "
              f"{sca.iterations} it), grid {grid.utility:.5f} at {np.round(grid.strategy_star.dbm, 2)} dBm, "
              f"gap {100 * gap:.2f}%, {time.perf_counter() - t0:.0f} s")
    assert verdict(4, "SCA vs 64x64 exhaustive search", sca.converged and gap <= 0.01, detail)


def test_5_covertness_boundary(defaults, verdict):
    grid = np.arange(0.0, 30.0 + 1e-9, 0.5)
    pj, de = minimal_feasible_jamming(defaults, grid)
    pj_dbm = 10 * math.log10(pj) + 30 if pj is not None else math.nan
    below = evaluate_point(defaults, Strategy(defaults.p_d_min, 10 ** ((pj_dbm - 0.5) / 10 - 3)))
    detail = (f"minimal covert p_j {pj_dbm:.1f} dBm; FA+MD there {de:.5f}, "
              f"0.5 dB below {below.bundle.detection_error:.5f} (need >= {1 - defaults.covertness_eps})")
    assert verdict(5, "covertness boundary near 12 dBm", abs(pj_dbm - 12.0) <= 3.0, detail)


def test_6_covert_vs_secrecy(defaults, covert_equilibrium, verdict):
    cov = covert_equilibrium.bundle
    sec = optimize_pd(defaults, defaults.p_j_max, covert=False)
    ok = (abs(cov.utility - 0.5) <= 0.1 and abs(cov.p_secure - 0.97) <= 0.02
          and sec.bundle.p_secure < cov.p_secure and sec.bundle.utility < 0)
    detail = (f"covert utility {cov.utility:.4f}, secure {cov.p_secure:.4f}; "
              f"secrecy baseline at p_j max: utility {sec.bundle.utility:.4f}, secure {sec.bundle.p_secure:.4f}")
    assert verdict(6, "covert approach vs secrecy baseline", ok, detail)


def _preset_curves(defaults, name):
    p = ex.PRESETS[name]
    spec = ex.SweepSpec(p["name"], tuple(parse_grid(p["values"])), p["level_name"], tuple(parse_grid(p["levels"])))
    _, curves = ex.run_sweep(defaults, spec, ScaConfig())
    return {lv: np.array([u for _, u in pts]) for lv, pts in curves.items()}


def test_7_sweep_shapes(defaults, verdict):
    t0 = time.perf_counter()
    warden = _preset_curves(defaults, "warden-density")
    jammer = _preset_curves(defaults, "jammer-density")
    thresh = _preset_curves(defaults, "warden-threshold")
    checks = {
        "lambda_w decreasing": all(np.all(np.diff(u) < 0) for u in warden.values()),
        "lambda_j increasing": all(np.all(np.diff(u) > 0) for u in jammer.values()),
        "smaller lambda_j gain at doubled lambda_d": np.ptp(jammer[0.2]) < np.ptp(jammer[0.1]),
        "xi_w increasing": all(np.all(np.diff(u) > 0) for u in thresh.values()),
        "xi_w concave": all(np.all(np.diff(u, 2) <= 1e-3) for u in thresh.values()),
        "higher for lower xi_d": bool(np.all(thresh[-10.0] > thresh[-5.0])),
    }
    gains = {lv: float(u[-1] - u[0]) for lv, u in jammer.items()}
    failed = [k for k, v in checks.items() if not v]
    detail = (f"lambda_j gains {gains}; max second difference in xi_w "
              f"{max(float(np.max(np.diff(u, 2))) for u in thresh.values()):.2e}; "
              f"failed: {failed or 'none'}; {time.perf_counter() - t0:.0f} s")
    assert verdict(7, "sweep shapes", not failed, detail)


# ----------------------------------------------------------------- invariants

ALPHAS = (2.5, 3.0, 3.5, 4.0, 5.0, 6.0)


def _random_params(rng):
    return SystemParams(
        pathloss_exp=float(rng.choice(ALPHAS)),
        lambda_d=float(10 ** rng.uniform(-2, -0.3)),
        lambda_w=float(10 ** rng.uniform(-3, -1.3)),
        lambda_j=float(10 ** rng.uniform(-2, -0.3)),
        sinr_thresh_d2d=float(10 ** rng.uniform(-2, 0)),
        sinr_thresh_warden=float(10 ** rng.uniform(-3, 0)),
        covertness_eps=float(rng.uniform(0.005, 0.2)),
    )


def _invariant_failures(params, rng):
    fails = []
    s = Strategy.from_dbm(*rng.uniform(0.0, 30.0, 2))
    model = WardenModel(params, s)
    tau = np.geomspace(params.noise_warden, 1e3, 40)
    fa, md = model.fa(tau), model.md(tau)
    if np.any(np.diff(fa) > 1e-12) or np.any(np.diff(md) < -1e-12):
        fails.append("FA/MD monotonicity")
    t = np.geomspace(1e-12, 1e2, 60)
    if np.any(np.diff(stable_cdf_table(params.pathloss_exp).cdf(model.nu, t)) < -1e-9):
        fails.append("interference CDF monotone")
    res = best_response_tau(params, s, model)
    b = evaluate_bundle(params, s, res.tau_star, model)
    probs = (b.p_success, b.p_fa, b.p_md, b.p_secrecy_outage, b.p_secure)
    if not all(0.0 <= v <= 1.0 for v in probs) or not 0 <= b.detection_error <= 1.0:
        fails.append("probability bounds")
    # common scaling of powers and warden noise
    c = float(10 ** rng.uniform(-3, 3))
    scaled = best_response_tau(params.with_(noise_warden=params.noise_warden * c), Strategy(s.p_d * c, s.p_j * c))
    if abs(scaled.tau_star / (c * res.tau_star) - 1) > 1e-4 or \
            abs(scaled.detection_error_at_star - res.detection_error_at_star) > 1e-7:
        fails.append("scale invariance of tau*")
    # surrogate conditions 1-3
    x = rng.random(2)
    g = rng.normal(size=2)
    delta = float(rng.uniform(1e-3, 5))
    sur = build_surrogate(b.utility, g, x, delta)
    if sur(x) != b.utility or not np.array_equal(sur.grad(x), g) or not np.all(np.linalg.eigvalsh(sur.hessian) > 0):
        fails.append("surrogate conditions")
    return fails


def _sca_descends(params):
    try:
        res = sca_solve(params, ScaConfig(max_iter=6, restoration_iter=10))
    except NoFeasiblePoint:
        return True
    rows = [r for r in res.trace if r.iteration > 0]
    first = next((i for i, r in enumerate(rows) if r.u1 <= 0), None)
    if first is None:
        return True
    u0s = np.array([r.u0 for r in rows[first:]])
    return bool(np.all(np.diff(u0s) <= 1e-9))


def test_8_invariants(verdict):
    t0 = time.perf_counter()
    for alpha in ALPHAS:
        # density of the normalised warden signal integrates to one
        table = signal_table(alpha)
        total = integrate.quad(lambda z: math.exp(z) * float(table.pdf(math.exp(z))), -40, 60, limit=400)[0]
        if abs(total - 1) > 1e-6:
            verdict(8, "randomised invariants", False, f"density mass {total} at alpha {alpha}")
            pytest.fail("density normalisation")
    rng = np.random.default_rng(8)
    failures = {}
    for _ in range(200):
        params = _random_params(rng)
        for f in _invariant_failures(params, rng):
            failures[f] = failures.get(f, 0) + 1
        if not _sca_descends(params):
            failures["SCA descent"] = failures.get("SCA descent", 0) + 1
    elapsed = time.perf_counter() - t0
    detail = f"200 draws, failures {failures or 'none'}, {elapsed:.0f} s"
    assert verdict(8, "randomised invariants", not failures and elapsed < 300, detail)
