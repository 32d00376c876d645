import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from infoagg.equilibrium import (aggregate_loading, fixed_point_map, precision_sweep,
                                 price_precision, price_precision_formula, recover_theta,
                                 reduced_precision, report_root, solve, solve_baseline,
                                 solve_multi, solve_report, stability_probe, vector_fixed_point,
                                 vector_map)
from infoagg.errors import DegenerateRecovery, NonPositiveStdDev, WrongScenario
from infoagg.inference import (SignalSet, condition_generic, determinant_alpha,
                               report_observation)
from infoagg.params import EquilibriumCoefficients, ModelParams

sig = st.floats(-1, 1).map(lambda e: 10.0 ** e)
UNIT = ModelParams()
CASE2 = ModelParams(sigma_y=2.0, sigma_eps=0.5)


def log_uniform_draws(n, seed):
    rs = np.random.default_rng(seed)
    return 10.0 ** rs.uniform(-1, 1, (n, 4))


# --- baseline --------------------------------------------------------------

def test_baseline_price():
    c = solve_baseline(ModelParams(sigma_eta=0.5 ** 0.5, gamma=2.0, supply=1.0, publishers=0))
    assert (c.a, c.b) == (1.0, 0.0)
    assert c.c == pytest.approx(-1.0, abs=1e-15)
    assert 3.0 + c.c == pytest.approx(2.0, abs=1e-15)


def test_baseline_zero_supply_and_arithmetic():
    assert solve_baseline(ModelParams(supply=0.0, publishers=0)).c == 0.0
    c = solve_baseline(ModelParams(gamma=1.0, sigma_eta=1.0, supply=2.0, publishers=0))
    assert c.c == -2.0 and c.posterior_variance == 1.0


def test_baseline_wrong_scenario():
    with pytest.raises(WrongScenario):
        solve_baseline(UNIT)
    with pytest.raises(NonPositiveStdDev):
        solve_baseline(ModelParams(sigma_x=0.0, publishers=0))


# --- fixed-point map -------------------------------------------------------

def test_map_examples():
    assert fixed_point_map(UNIT, 0.0) == 0.0
    assert fixed_point_map(UNIT, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert fixed_point_map(UNIT, 0.1) > 0.1


@settings(max_examples=300, deadline=None)
@given(sig, sig, sig)
def test_map_has_root_at_b_star(s_x, s_eps, s_y):
    p = ModelParams(1.0, s_x, s_eps, s_y, 1.0, 1.0, 1)
    b = report_root(p)
    assert abs(fixed_point_map(p, b) - b) < 1e-12 * max(1.0, b)
    assert fixed_point_map(p, 0.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(sig, sig, sig, st.floats(1e-6, 1.0))
def test_map_factorization(s_x, s_eps, s_y, u):
    # T(b) - b = b^2 (sx2 se - (sx2 + sy2) b) / alpha: above b on (0, b*), below past it
    p = ModelParams(1.0, s_x, s_eps, s_y, 1.0, 1.0, 1)
    b_star = report_root(p)
    b = u * 2 * b_star
    if 0 < b < b_star * (1 - 1e-9):
        assert fixed_point_map(p, b) > b
    elif b > b_star * (1 + 1e-9):
        assert fixed_point_map(p, b) < b


# --- report equilibrium ----------------------------------------------------

def test_report_examples():
    c, d = solve_report(UNIT)
    assert c.b == 0.5 and c.a == 1.0
    assert d.roots == (0.0, 0.5) and d.selected == 0.5
    c2, d2 = solve_report(CASE2)
    assert c2.b == pytest.approx(0.1, abs=1e-16)
    assert len(d2.numeric_roots) == 1
    assert abs(d2.numeric_roots[0] - 0.1) <= 1e-12


def test_report_coefficients_consistent():
    p = ModelParams(sigma_eta=0.7, gamma=2.0, supply=1.5)
    c, _ = solve_report(p)
    oracle = condition_generic(report_observation(p, c.b, SignalSet(0.0, [0.0], 0.0)))
    assert c.posterior_variance == pytest.approx(oracle.variance_return, abs=1e-13)
    assert c.c == pytest.approx(-2.0 * 1.5 * c.posterior_variance, abs=1e-15)


def test_report_no_common_error_is_fully_revealing():
    c, d = solve_report(ModelParams(sigma_eps=0.0))
    assert c.b == 0.0 and d.degenerate and d.roots == (0.0,)
    assert price_precision(ModelParams(sigma_eps=0.0), c).is_infinite


def test_report_no_reading_noise_flagged():
    p = ModelParams(sigma_y=0.0, sigma_eps=0.8)
    c, d = solve_report(p)
    assert d.degenerate and c.b == pytest.approx(0.8)
    # x and the report: sx2 se2 / (sx2 + se2)
    assert c.posterior_variance == pytest.approx(1.0 + 0.64 / 1.64, abs=1e-15)


def test_root_completeness_500_draws():
    for s_eta, s_x, s_eps, s_y in log_uniform_draws(500, 1):
        p = ModelParams(s_eta, s_x, s_eps, s_y, 1.0, 1.0, 1)
        c, d = solve_report(p)
        closed = s_x ** 2 * s_eps / (s_x ** 2 + s_y ** 2)
        assert 0.0 in d.roots and c.b == closed
        assert len(d.numeric_roots) == 1
        assert abs(d.numeric_roots[0] - closed) <= 1e-12


def test_fixed_point_residual_500_draws():
    # as stated; one draw (sigma_x ~ sigma_eps ~ 8, sigma_y ~ 0.1) misses, see below
    worst = max(solve_report(ModelParams(*r, 1.0, 1.0, 1))[1].residual
                for r in log_uniform_draws(500, 1))
    assert worst < 1e-12


def test_fixed_point_residual_within_rounding_of_b_star():
    # |T'(b*) - 1| = b*^2 (sx2 + sy2) / alpha(b*) can reach ~2e3, so one ulp of
    # b* alone moves the residual by ~4e-12; the residual is at that floor
    for r in log_uniform_draws(500, 1):
        p = ModelParams(*r, 1.0, 1.0, 1)
        c, d = solve_report(p)
        b = c.b
        slope = b ** 2 * (p.sigma_x ** 2 + p.sigma_y ** 2) / determinant_alpha(p, b)
        floor = (1.0 + slope) * np.spacing(b)
        assert d.residual <= 4 * floor


# --- precision -------------------------------------------------------------

def test_precision_examples():
    c, _ = solve_report(UNIT)
    assert price_precision(UNIT, c).value == 4.0
    assert price_precision_formula(UNIT).value == 4.0
    c2, _ = solve_report(CASE2)
    assert price_precision(CASE2, c2).value == pytest.approx(100.0, rel=1e-12)
    assert price_precision_formula(CASE2).value == pytest.approx(100.0, rel=1e-12)
    assert price_precision(UNIT.with_publishers(0),
                           solve_baseline(UNIT.with_publishers(0))).is_infinite


def test_precision_routes_agree_on_grid():
    grid = np.geomspace(0.1, 10, 10)
    worst = 0.0
    for ax, ay, ae in itertools.product(grid, grid, grid):
        p = ModelParams(1.0, ax ** -0.5, ae ** -0.5, ay ** -0.5, 1.0, 1.0, 1)
        c, _ = solve_report(p)
        direct = price_precision(p, c).value
        formula = price_precision_formula(p).value
        worst = max(worst, abs(direct - formula) / formula)
    assert worst <= 1e-12


def test_precision_monotone_in_each_precision():
    grid = np.geomspace(0.1, 10, 10)
    cube = np.empty((10, 10, 10))
    for (i, ax), (j, ay), (k, ae) in itertools.product(*(list(enumerate(grid)),) * 3):
        cube[i, j, k] = price_precision_formula(
            ModelParams(1.0, ax ** -0.5, ae ** -0.5, ay ** -0.5, 1.0, 1.0, 1)).value
    assert np.all(np.diff(cube, axis=0) > 0)   # alpha_x
    assert np.all(np.diff(cube, axis=1) < 0)   # alpha_y
    assert np.all(np.diff(cube, axis=2) > 0)   # alpha_eps


@settings(max_examples=200, deadline=None)
@given(sig, sig, sig, sig)
def test_one_report_makes_price_noisy(s_eta, s_x, s_eps, s_y):
    p = ModelParams(s_eta, s_x, s_eps, s_y, 1.0, 1.0, 1)
    assert price_precision(p.with_publishers(0), solve(p.with_publishers(0))).is_infinite
    assert not price_precision(p, solve(p)).is_infinite


# --- stability -------------------------------------------------------------

def test_stability_from_small_delta():
    rep = stability_probe(UNIT, 0.01)
    assert rep.expansion > 0
    assert np.all(np.diff(rep.trajectory) >= 0)
    assert abs(rep.limit - 0.5) < 1e-12


def test_stability_at_root_stays():
    rep = stability_probe(UNIT, 0.5)
    assert rep.iterations == 1 and abs(rep.limit - 0.5) < 1e-15


def test_stability_case2():
    rep = stability_probe(CASE2, 0.001)
    assert abs(rep.limit - 0.1) < 1e-12


@pytest.mark.parametrize("frac", [1e-4, 1e-3, 1e-2])
def test_stability_damped(frac):
    b_star = report_root(UNIT)
    rep = stability_probe(UNIT, frac * b_star, damping=0.5)
    assert rep.expansion > 0
    assert abs(rep.limit - b_star) < 1e-12


@pytest.mark.parametrize("frac", [1e-4, 1e-3, 1e-2])
def test_stability_within_ten_thousand_iterations(frac):
    # as stated; escape from delta takes ~(se^2 + sy^2) / (se delta) steps, so
    # the 1e-4 b* start needs ~4e4 and cannot meet the cap
    b_star = report_root(UNIT)
    rep = stability_probe(UNIT, frac * b_star, max_iter=10_000)
    assert abs(rep.limit - b_star) < 1e-12


def test_stability_argument_checks():
    with pytest.raises(ValueError):
        stability_probe(UNIT, 0.0)
    with pytest.raises(ValueError):
        stability_probe(UNIT, 0.1, damping=0.0)
    with pytest.raises(WrongScenario):
        stability_probe(ModelParams(sigma_eps=0.0), 0.1)


# --- recovery --------------------------------------------------------------

def test_recover_hand_example():
    c = EquilibriumCoefficients(1.0, 0.5, 0.0, 0.0)
    theta, eps = recover_theta(UNIT, c, 1.4, 1.2)
    assert theta == pytest.approx(1.0, abs=1e-14)
    assert eps == pytest.approx(0.4, abs=1e-14)


def test_recover_zero_noise():
    c, _ = solve_report(UNIT)
    theta, eps = recover_theta(UNIT, c, 2.5, 2.5 + c.c)
    assert theta == 2.5 and eps == 0.0


def test_recover_back_substitution():
    p = ModelParams(0.7, 1.3, 0.8, 1.1, 2.0, 1.0, 1)
    c, _ = solve_report(p)
    rs = np.random.default_rng(0)
    for theta, eps in rs.standard_normal((1000, 2)) * [5, 1]:
        x_j = theta + p.sigma_eps * eps
        price = theta + c.b * eps + c.c
        t_hat, e_hat = recover_theta(p, c, x_j, price)
        assert abs(t_hat - theta) < 1e-10
        assert abs(t_hat + c.b * e_hat + c.c - price) < 1e-12
        assert abs(t_hat + p.sigma_eps * e_hat - x_j) < 1e-12


def test_recover_degenerate():
    p = ModelParams(sigma_y=0.0)
    c, _ = solve_report(p)
    with pytest.raises(DegenerateRecovery):
        recover_theta(p, c, 1.0, 1.0)


# --- m reports -------------------------------------------------------------

def test_multi_m1_is_report():
    assert solve_multi(UNIT) == solve_report(UNIT)


def test_multi_four_reports():
    p = UNIT.with_publishers(4)
    c, _ = solve_multi(p)
    assert c.b == pytest.approx(0.2, abs=1e-15)
    assert price_precision(p, c).value == pytest.approx(6.25, rel=1e-13)


def test_multi_precision_grows_like_m():
    for m in (10, 100, 1000):
        expected = m * (1 + 1 / m) ** 2
        assert reduced_precision(UNIT, m) == pytest.approx(expected, rel=1e-13)
        p = UNIT.with_publishers(m)
        assert price_precision(p, solve(p)).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m", [2, 3])
def test_vector_fixed_point_from_symmetric_start(m):
    p = UNIT.with_publishers(m)
    c, _ = solve_multi(p, cross_check=True)
    loadings, _ = vector_fixed_point(p, np.full(m, 1.1 * c.b))
    assert np.max(np.abs(loadings - c.b)) < 1e-9


@pytest.mark.parametrize("m", [2, 3])
def test_vector_map_preserves_direction(m):
    p = UNIT.with_publishers(m)
    b = np.linspace(0.2, 0.4, m)
    out = vector_map(p, b)
    assert np.allclose(out / np.linalg.norm(out), b / np.linalg.norm(b), atol=1e-14)


@pytest.mark.parametrize("m", [2, 3])
def test_vector_fixed_point_asymmetric_start_reaches_symmetry(m):
    # as stated: from b_k = b* (1 + 0.1 k / m) the loadings should equalize.
    # The map only rescales the loading vector, so this fails; see the README.
    p = UNIT.with_publishers(m)
    c, _ = solve_multi(p)
    init = c.b * (1 + 0.1 * np.arange(1, m + 1) / m)
    loadings, _ = vector_fixed_point(p, init)
    assert np.ptp(loadings) < 1e-9


# --- sweep -----------------------------------------------------------------

def test_sweep_u_shape():
    p = ModelParams(sigma_x=1.0, sigma_y=3.0, sigma_eps=1.0)
    curve = precision_sweep(p, 30)
    assert curve.points[0].alpha_z.is_infinite
    assert all(not pt.alpha_z.is_infinite for pt in curve.points[1:])
    assert curve.argmin_m == 9
    vals = [pt.alpha_z.value for pt in curve.points[1:]]
    assert all(b < a for a, b in zip(vals[:8], vals[1:9]))
    assert all(b > a for a, b in zip(vals[8:], vals[9:]))
    assert vals[0] == pytest.approx(price_precision_formula(p).value, rel=1e-12)


def test_sweep_rising_when_readings_precise():
    curve = precision_sweep(ModelParams(sigma_y=0.8), 10)
    vals = [pt.alpha_z.value for pt in curve.points[1:]]
    assert curve.argmin_m == 1
    assert all(b > a for a, b in zip(vals, vals[1:]))


@settings(max_examples=100, deadline=None)
@given(sig, sig, sig)
def test_sweep_minimizer_near_ratio(s_x, s_eps, s_y):
    p = ModelParams(1.0, s_x, s_eps, s_y, 1.0, 1.0, 1)
    m_dag = (s_y / s_x) ** 2
    m_max = 40
    curve = precision_sweep(p, m_max)
    target = min(max(m_dag, 1.0), m_max)
    assert abs(curve.argmin_m - target) < 1.0


def test_sweep_rejects_bad_input():
    with pytest.raises(WrongScenario):
        precision_sweep(ModelParams(sigma_eps=0.0), 5)
    with pytest.raises(ValueError):
        precision_sweep(UNIT, 0)


# --- exact aggregation diagnostic ------------------------------------------

def test_aggregate_loading_below_selected_root():
    c, _ = solve_report(UNIT)
    # w_y se + w_z b = sx2 sy2 b / alpha = 0.5 / 1.5
    assert aggregate_loading(UNIT, c.b) == pytest.approx(1 / 3, abs=1e-15)
    assert aggregate_loading(UNIT, c.b) < c.b
