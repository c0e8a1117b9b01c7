import math

import numpy as np
import pytest

from teugels_control import (BsdeSpec, RegressionConfig, apriori_bound_ratio,
                             check_comparison, make_driver, make_terminal,
                             solve_backward, solve_linear_closed_form)


def test_zero_driver_preserves_terminal_mean(small_ensemble):
    """Least squares with an intercept keeps the cross-path mean exact."""
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=make_driver("zero"))
    sol = solve_backward(spec, small_ensemble)
    l_final = small_ensemble.levy_values()[:, -1]
    assert sol.y0 == pytest.approx(float(np.mean(l_final)), abs=1e-12)
    expected_se = float(np.std(l_final, ddof=1) / math.sqrt(len(l_final)))
    assert sol.y0_stderr == pytest.approx(expected_se, rel=1e-10)


def test_constant_driver_integrates_exactly(small_ensemble):
    spec = BsdeSpec(terminal=make_terminal("constant", value=0.0),
                    driver=make_driver("constant", a=1.0))
    sol = solve_backward(spec, small_ensemble)
    assert sol.y0 == pytest.approx(1.0, abs=1e-10)
    assert sol.y0_stderr == pytest.approx(0.0, abs=1e-12)


def test_linear_decay_matches_closed_form(small_ensemble):
    spec = BsdeSpec(terminal=make_terminal("constant", value=2.0),
                    driver=make_driver("linear_y", b=-0.5), lipschitz_y=0.5)
    sol = solve_backward(spec, small_ensemble)
    assert sol.y0 == pytest.approx(2.0 * math.exp(-0.5), abs=5e-3)


def test_closed_form_ode_reference():
    a_fn, b_fn = make_driver("linear_y", a=0.3, b=0.2).ode_parts()
    t_grid = np.array([0.0, 1.0])
    y = solve_linear_closed_form(a_fn, b_fn, 1.5, t_grid)
    # dy/dt = -(a + b y) backward from y(1) = 1.5
    expected = (1.5 + 0.3 / 0.2) * math.exp(0.2) - 0.3 / 0.2
    assert y[0] == pytest.approx(expected, rel=1e-9)
    assert y[-1] == pytest.approx(1.5, rel=1e-12)


def test_solution_shapes(small_ensemble):
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=make_driver("zero"))
    sol = solve_backward(spec, small_ensemble)
    n, m = small_ensemble.n_paths, small_ensemble.n_steps
    assert sol.Y.shape == (n, m + 1)
    assert sol.Z.shape == (n, m, 2)
    assert len(sol.times) == m + 1
    assert len(sol.y_mean) == m + 1
    assert len(sol.z_norm_mean) == m
    assert np.all(sol.fit_stderr >= 0.0)


def test_degenerate_state_falls_back_to_mean(small_ensemble):
    n, m = small_ensemble.n_paths, small_ensemble.n_steps
    state = np.full((n, m + 1), 2.0)
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=make_driver("zero"))
    sol = solve_backward(spec, small_ensemble, state=state)
    assert sol.y0 == pytest.approx(2.0, abs=1e-12)


def test_regression_degree_validated(small_ensemble):
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=make_driver("zero"))
    with pytest.raises(ValueError):
        solve_backward(spec, small_ensemble, reg=RegressionConfig(degree=4))


def test_comparison_equal_specs_has_no_violations(small_ensemble):
    driver = make_driver("linear_z", a=0.05, b=0.1, gamma=(0.1, 0.05))
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=driver,
                    lipschitz_y=driver.lipschitz_y,
                    lipschitz_z=driver.lipschitz_z,
                    gamma=driver.gamma, f1=driver.f1)
    rep = check_comparison(spec, spec, small_ensemble)
    assert rep.ok_preconditions
    assert rep.violation_fraction == 0.0
    assert rep.jump_condition_min > -1.0


def test_comparison_requires_structure(small_ensemble):
    plain = BsdeSpec(terminal=make_terminal("identity"),
                     driver=make_driver("zero"))
    rep = check_comparison(plain, plain, small_ensemble)
    assert not rep.ok_preconditions
    assert rep.messages


def test_apriori_ratio_finite(small_ensemble):
    spec = BsdeSpec(terminal=make_terminal("identity"), driver=make_driver("zero"))
    sol = solve_backward(spec, small_ensemble)
    ratio = apriori_bound_ratio(sol, spec, small_ensemble)
    assert math.isfinite(ratio)
    assert ratio > 0.0
