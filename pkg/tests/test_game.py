import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from d2dcovert import Strategy, SystemParams
from d2dcovert.analytic import WardenModel
from d2dcovert.game import (
    InfeasibleSubproblem,
    NoFeasiblePoint,
    NonUnimodalWarning,
    PowerBox,
    ScaConfig,
    best_response_tau,
    build_surrogate,
    count_local_minima,
    evaluate_point,
    exhaustive_search,
    kkt_residual,
    minimal_feasible_jamming,
    numeric_gradient,
    optimize_pd,
    projected_gradient_residual,
    sca_solve,
    solve_equilibrium,
    solve_subproblem,
    u0,
    u0_from,
    u1,
    u1_from,
)
from d2dcovert.model import ProbabilityBundle


@pytest.fixture(scope="module")
def equilibrium(defaults):
    return sca_solve(defaults)


# ------------------------------------------------------------------ lower stage


def test_count_local_minima():
    assert count_local_minima([3, 2, 1, 2, 3]) == 1
    assert count_local_minima([3, 1, 2, 1, 3]) == 2
    # dips shallower than the slack are not separate minima
    assert count_local_minima([3, 1, 1 + 1e-9, 1 - 1e-8, 3], slack=1e-6) == 1


def test_best_response_interior(defaults):
    s = Strategy.from_dbm(20.0, 10.0)
    res = best_response_tau(defaults, s)
    assert res.local_minima == 1
    assert defaults.noise_warden < res.tau_star
    assert res.bracket[0] <= res.tau_star <= res.bracket[1]
    assert res.detection_error_at_star < 1.0
    model = WardenModel(defaults, s)
    assert res.detection_error_at_star == pytest.approx(float(model.detection_error(res.tau_star)))
    assert res.detection_error_at_star <= model.detection_error(np.array(res.bracket)).min() + 1e-12
    assert res.detection_error_at_star <= res.scan_de.min() + 1e-12


@pytest.mark.parametrize("p_dbm", [(20.0, 10.0), (0.0, 12.3), (30.0, 30.0), (5.0, 0.0)])
def test_best_response_certificate(defaults, p_dbm):
    s = Strategy.from_dbm(*p_dbm)
    res = best_response_tau(defaults, s)
    model = WardenModel(defaults, s)
    near = model.detection_error(res.tau_star * 10 ** (np.array([-0.1, 0.1]) / 10))
    assert np.all(res.detection_error_at_star <= near + 1e-12)


def test_best_response_degenerate_interference():
    quiet = SystemParams(lambda_d=1e-12, lambda_j=1e-12)
    res = best_response_tau(quiet, Strategy.from_dbm(20.0, 10.0))
    assert res.detection_error_at_star < 1.0


def test_best_response_hint_matches_scan(defaults):
    s = Strategy.from_dbm(10.0, 20.0)
    full = best_response_tau(defaults, s)
    hinted = best_response_tau(defaults, s, tau_hint=full.tau_star * 1.05)
    assert hinted.local_minima is None
    assert hinted.detection_error_at_star == pytest.approx(full.detection_error_at_star, abs=1e-10)


@pytest.mark.parametrize("c", [1e-3, 10.0, 1e4])
def test_best_response_scale_invariant(defaults, c):
    s = Strategy.from_dbm(20.0, 10.0)
    scaled = defaults.with_(noise_warden=defaults.noise_warden * c)
    a = best_response_tau(defaults, s)
    b = best_response_tau(scaled, Strategy(s.p_d * c, s.p_j * c))
    assert b.tau_star == pytest.approx(a.tau_star * c, rel=1e-5)
    assert b.detection_error_at_star == pytest.approx(a.detection_error_at_star, abs=1e-8)


def test_non_unimodal_warning_type():
    assert issubclass(NonUnimodalWarning, UserWarning)


# ---------------------------------------------------------------- objectives


def _bundle(utility=0.5, de=1.0):
    return ProbabilityBundle(0.9, 0.5, de - 0.5, 0.1, 0.95, de, utility)


def test_u0_u1_conventions(defaults):
    eps = defaults.covertness_eps
    assert u1_from(defaults, 1 - eps) == pytest.approx(0.0, abs=1e-15)
    assert u1_from(defaults, 1.0) == pytest.approx(-eps)
    assert u0_from(_bundle(utility=0.5)) == -0.5
    s = Strategy.from_dbm(15, 15)
    pe = evaluate_point(defaults, s)
    assert u0(defaults, s, pe.tau_star) == pytest.approx(-pe.bundle.utility)
    assert u1(defaults, s, pe.tau_star) == pytest.approx(1 - eps - pe.bundle.detection_error)


# ------------------------------------------------------------- SCA components


def test_power_box_round_trip(defaults):
    for log in (False, True):
        box = PowerBox.from_params(defaults, log)
        for x in ([0, 0], [1, 1], [0.3, 0.8]):
            s = box.to_strategy(x)
            assert s.in_box(defaults)
            assert np.allclose(box.to_unit(s), x, atol=1e-12)
    assert np.allclose(PowerBox.from_params(defaults, True).to_strategy([0.5, 0.5]).dbm, (15.0, 15.0))


def test_numeric_gradient_simple():
    assert np.allclose(numeric_gradient(lambda x: 3.0, [0.4, 0.6]), 0.0)
    assert np.allclose(numeric_gradient(lambda x: x[0], [0.4, 0.6]), [1.0, 0.0], atol=1e-6)
    # one-sided stencils at the box faces are exact on quadratics
    f = lambda x: x[0] ** 2 + 3 * x[1] ** 2
    assert np.allclose(numeric_gradient(f, [0.0, 1.0]), [0.0, 6.0], atol=1e-8)


def test_numeric_gradient_against_five_point(defaults):
    box = PowerBox.from_params(defaults)
    f = lambda x: u0_from(evaluate_point(defaults, box.to_strategy(x)).bundle)
    x = box.to_unit(Strategy.from_dbm(15.0, 15.0))
    g = numeric_gradient(f, x, 1e-4)
    h = 1e-3
    ref = np.empty(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        ref[i] = (f(x - 2 * e) - 8 * f(x - e) + 8 * f(x + e) - f(x + 2 * e)) / (12 * h)
    assert np.allclose(g, ref, rtol=1e-4)


@given(
    value=st.floats(-5, 5),
    grad=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    anchor=st.tuples(st.floats(0, 1), st.floats(0, 1)),
    delta=st.floats(1e-3, 10),
)
def test_surrogate_conditions(value, grad, anchor, delta):
    s = build_surrogate(value, grad, anchor, delta)
    assert s(anchor) == value
    assert np.array_equal(s.grad(anchor), np.asarray(grad, dtype=float))
    assert np.all(np.linalg.eigvalsh(s.hessian) == pytest.approx(delta))


def test_surrogate_rejects_bad_delta():
    with pytest.raises(ValueError):
        build_surrogate(0.0, [0, 0], [0, 0], 0.0)


def test_subproblem_inactive():
    s0 = build_surrogate(0.0, [1.0, -2.0], [0.5, 0.5], 4.0)
    s1 = build_surrogate(-1.0, [0.1, 0.1], [0.5, 0.5], 4.0)
    sol = solve_subproblem(s0, s1)
    assert not sol.active and sol.multiplier == 0.0
    assert np.allclose(sol.x, np.clip(np.array([0.5, 0.5]) - np.array([1.0, -2.0]) / 4.0, 0, 1))


def test_subproblem_active_kkt():
    s0 = build_surrogate(0.0, [-1.0, 1.0], [0.5, 0.5], 2.0)
    s1 = build_surrogate(-0.01, [1.0, 0.2], [0.5, 0.5], 2.0)
    sol = solve_subproblem(s0, s1)
    assert sol.active and sol.multiplier > 0
    assert abs(s1(sol.x)) < 1e-10
    # minimiser of s0 + mu s1, whose curvature is (1 + mu) delta
    mu = sol.multiplier
    stationary = np.clip(s0.anchor - (s0.gradient + mu * s1.gradient) / ((1 + mu) * s0.delta), 0, 1)
    assert np.allclose(sol.x, stationary, atol=1e-10)
    # certificate in terms of the surrogate gradients at the solution
    r, _ = kkt_residual(sol.x, s0.grad(sol.x), s1.grad(sol.x), s1(sol.x))
    assert r < 1e-8


def test_subproblem_infeasible():
    s0 = build_surrogate(0.0, [0.0, 0.0], [0.5, 0.5], 1.0)
    s1 = build_surrogate(5.0, [0.1, 0.1], [0.5, 0.5], 1.0)
    with pytest.raises(InfeasibleSubproblem):
        solve_subproblem(s0, s1)


def test_subproblem_grid_oracle():
    rng = np.random.default_rng(7)
    g = np.linspace(0, 1, 1000)
    X, Y = np.meshgrid(g, g, indexing="ij")
    checked = 0
    while checked < 100:
        anchor = rng.random(2)
        delta = rng.uniform(0.5, 5)
        s0 = build_surrogate(rng.normal(), rng.normal(size=2), anchor, delta)
        s1 = build_surrogate(rng.normal(scale=0.5), rng.normal(size=2), anchor, delta)
        q = lambda s: s.value + s.gradient[0] * (X - anchor[0]) + s.gradient[1] * (Y - anchor[1]) + \
            0.5 * delta * ((X - anchor[0]) ** 2 + (Y - anchor[1]) ** 2)
        feas = q(s1) <= 0
        if not feas.any():
            with pytest.raises(InfeasibleSubproblem):
                solve_subproblem(s0, s1)
            continue
        sol = solve_subproblem(s0, s1)
        assert s1(sol.x) <= 1e-10
        grid_best = q(s0)[feas].min()
        # the grid can only miss the optimum by its resolution times the local slope
        slope = np.linalg.norm(s0.gradient) + delta * 2
        assert s0(sol.x) <= grid_best + 1e-12
        assert s0(sol.x) >= grid_best - slope * 2e-3
        checked += 1


def test_projected_gradient_residual_zero_at_box_corner():
    assert projected_gradient_residual(np.array([0.0, 1.0]), np.array([1.0, -1.0]), np.zeros(2), 0.0) == 0.0


# ------------------------------------------------------------------ SCA driver


def test_sca_config_validation():
    for bad in ({"prox_delta": 0}, {"gamma": 0}, {"gamma": 1.5}, {"tol": 0}, {"max_iter": 0}, {"coordinates": "x"}):
        with pytest.raises(ValueError):
            ScaConfig(**bad)


def test_sca_defaults(defaults, equilibrium):
    res = equilibrium
    assert res.converged and res.status == "converged"
    assert res.strategy_star.in_box(defaults)
    assert 1 - defaults.covertness_eps - res.bundle.detection_error <= 1e-6
    assert res.kkt_residual < 1e-4
    assert res.tau_star > defaults.noise_warden


def test_sca_descent(equilibrium):
    rows = [r for r in equilibrium.trace if r.iteration > 0]
    first = next(i for i, r in enumerate(rows) if r.u1 <= 0)
    u0s = np.array([r.u0 for r in rows[first:]])
    assert np.all(np.diff(u0s) <= 1e-9)
    assert all(r.u1 <= 1e-6 for r in rows[first:])


def test_sca_fixed_point_start(defaults, equilibrium):
    again = sca_solve(defaults, initial=equilibrium.strategy_star)
    assert again.iterations <= 5
    assert np.allclose(again.strategy_star.dbm, equilibrium.strategy_star.dbm, atol=0.05)


def test_sca_max_iter_status(defaults):
    res = sca_solve(defaults, ScaConfig(max_iter=1))
    assert res.status == "max_iter_exceeded" and not res.converged
    assert res.iterations == 1


def test_sca_no_feasible_point(defaults):
    tiny = defaults.with_(p_j_max=2e-3)
    with pytest.raises(NoFeasiblePoint):
        sca_solve(tiny, ScaConfig(restoration_iter=10))


def test_hybrid_not_worse_than_grid(defaults):
    hyb = solve_equilibrium(defaults, method="hybrid", grid_resolution=5)
    grid = exhaustive_search(defaults, 5)
    assert hyb.utility >= grid.utility - 1e-12
    with pytest.raises(ValueError):
        solve_equilibrium(defaults, method="newton")


# ------------------------------------------------------------ grid baselines


def test_exhaustive_all_infeasible(defaults):
    res = exhaustive_search(defaults.with_(p_j_max=2e-3), 2)
    assert res.status == "infeasible" and not res.feasible and res.strategy_star is None
    with pytest.raises(ValueError):
        exhaustive_search(defaults, 1)


def test_exhaustive_vacuous_covertness(defaults):
    from d2dcovert.game import evaluate_grid, power_grid

    loose = defaults.with_(covertness_eps=0.999)
    res = exhaustive_search(loose, 5)
    surf = evaluate_grid(loose, power_grid(1e-3, 1.0, 5), power_grid(1e-3, 1.0, 5))
    assert surf.feasible(loose.covertness_eps).all()
    assert res.utility == pytest.approx(surf.utility.max())


def test_exhaustive_tie_break(defaults):
    # with zero reward every covert point ties at minus the jamming cost; the cheapest jammer wins
    flat = defaults.with_(reward_w_d=0.0, cost_w_j=0.0, covertness_eps=0.999)
    res = exhaustive_search(flat, 3)
    assert res.strategy_star.p_j == pytest.approx(flat.p_j_min)
    assert res.strategy_star.p_d == pytest.approx(flat.p_d_min)


def test_minimal_feasible_jamming(defaults):
    pj, de = minimal_feasible_jamming(defaults, np.arange(0.0, 30.01, 0.5))
    assert pj is not None and de >= 1 - defaults.covertness_eps
    below = evaluate_point(defaults, Strategy(defaults.p_d_min, pj / 10 ** 0.05))
    assert below.bundle.detection_error < 1 - defaults.covertness_eps
    assert minimal_feasible_jamming(defaults, [0.0, 1.0]) == (None, None)


def test_optimize_pd_secrecy_at_least_covert(defaults):
    pj = 10 ** (15 / 10 - 3)
    cov = optimize_pd(defaults, pj, covert=True, grid_points=21)
    sec = optimize_pd(defaults, pj, covert=False, grid_points=21)
    assert cov is not None and sec.bundle.utility >= cov.bundle.utility - 1e-12
    assert cov.bundle.detection_error >= 1 - defaults.covertness_eps
    assert optimize_pd(defaults, 1e-3, covert=True, grid_points=11) is None
