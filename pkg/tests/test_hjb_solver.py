import math

import numpy as np
import pytest

from teugels_control import (CflError, ControlProblem, GridFunction, HjbConfig,
                             JumpMeasure, LevyModel, SpatialGrid, build_basis,
                             build_quadrature, cfl_dt_max, convergence_study,
                             generator_Lu, hjb_solve, make_control_driver,
                             make_forward, make_terminal, operator_Luk,
                             quadrature_moment_defect, step_backward)


def _problem(forward, terminal, controls=(0.0,), lipschitz=(1.0, 0.0, 0.0)):
    return ControlProblem(forward=forward, driver=make_control_driver("zero"),
                          terminal=terminal, controls=controls, horizon=1.0,
                          lipschitz=lipschitz)


@pytest.fixture(scope="module")
def point_model():
    return LevyModel(b=0.0, sigma2=1.0,
                     jumps=JumpMeasure.point_masses([(1.0, 1.0)]))


def test_point_mass_quadrature_is_exact(benchmark_model):
    rule = build_quadrature(benchmark_model, 16)
    np.testing.assert_array_equal(rule.nodes, [1.0])
    np.testing.assert_array_equal(rule.weights, [0.3])
    assert quadrature_moment_defect(rule, benchmark_model) == 0.0


def test_exponential_tail_quadrature_matches_moments(mixed_model):
    rule = build_quadrature(mixed_model, 16)
    assert quadrature_moment_defect(rule, mixed_model) < 1e-10


def test_grid_function_interpolates_and_extends():
    grid = SpatialGrid(0.0, 2.0, 5)
    v = GridFunction.from_values(grid, grid.nodes ** 2)
    np.testing.assert_allclose(v(grid.nodes), grid.nodes ** 2, atol=1e-14)
    # fitted clamp caps the extension at the steepest interior slope
    steepest = (4.0 - 1.5 ** 2) / 0.5
    assert v(np.array([3.0]))[0] == pytest.approx(4.0 + steepest)
    # below the grid the first-cell slope applies, not the clamp
    assert v(np.array([-1.0]))[0] == pytest.approx(-0.5)


def test_grid_function_derivatives_on_quadratic():
    grid = SpatialGrid(-1.0, 3.0, 41)
    v = GridFunction.from_values(grid, grid.nodes ** 2)
    xs = grid.nodes[5:-5]
    np.testing.assert_allclose(v.dx(xs), 2.0 * xs, atol=1e-9)
    np.testing.assert_allclose(v.d2x(xs), 2.0, atol=1e-7)


def test_generator_on_linear_function(point_model):
    basis = build_basis(point_model, 2)
    problem = _problem(make_forward("constant", c0=0.7),
                       make_terminal("constant", value=0.0),
                       lipschitz=(0.0, 0.0, 0.0))
    grid = SpatialGrid(-3.0, 5.0, 161)
    quad = build_quadrature(point_model, 16)
    v = GridFunction.from_values(grid, 1.3 * grid.nodes - 0.4)
    xs = grid.nodes[40:120]
    gen = generator_Lu(v, xs, 0.0, problem, point_model, quad)
    np.testing.assert_allclose(gen, point_model.moment(1) * 0.7 * 1.3, atol=1e-7)
    h1 = operator_Luk(v, xs, 0.0, 1, problem, point_model, basis, quad)
    np.testing.assert_allclose(h1, 0.7 * 1.3 / basis.a11, atol=1e-7)
    h2 = operator_Luk(v, xs, 0.0, 2, problem, point_model, basis, quad)
    np.testing.assert_allclose(h2, 0.0, atol=1e-7)


def test_step_rejects_unstable_dt(benchmark_model, benchmark_basis):
    problem = _problem(make_forward("linear", c1=1.0), make_terminal("identity"))
    grid = SpatialGrid(-1.0, 3.5, 46)
    with pytest.raises(CflError):
        hjb_solve(problem, benchmark_model, benchmark_basis, grid,
                  HjbConfig(n_steps=2))


def test_step_preserves_ordering(benchmark_model, benchmark_basis):
    """Explicit update under the stability bound is monotone in the data."""
    problem = _problem(make_forward("linear", c1=1.0), make_terminal("identity"))
    grid = SpatialGrid(-1.0, 3.5, 46)
    quad = build_quadrature(benchmark_model, 16)
    cfg = HjbConfig()
    dt = 0.5 * cfl_dt_max(problem, benchmark_model, benchmark_basis, grid, quad)
    lo = GridFunction.from_values(grid, grid.nodes)
    hi = GridFunction.from_values(grid, grid.nodes + 0.2 * (grid.nodes - 1.0) ** 2)
    lo_next, _ = step_backward(lo, 1.0 - dt, 1.0, problem, benchmark_model,
                               benchmark_basis, quad, cfg)
    hi_next, _ = step_backward(hi, 1.0 - dt, 1.0, problem, benchmark_model,
                               benchmark_basis, quad, cfg)
    inner = slice(1, -1)
    assert np.all(hi_next.values[inner] >= lo_next.values[inner] - 1e-12)


def test_constant_shift_passes_through(benchmark_model, benchmark_basis):
    problem = _problem(make_forward("linear", c1=1.0), make_terminal("identity"))
    grid = SpatialGrid(-1.0, 3.5, 46)
    quad = build_quadrature(benchmark_model, 16)
    cfg = HjbConfig()
    dt = 0.5 * cfl_dt_max(problem, benchmark_model, benchmark_basis, grid, quad)
    base = GridFunction.from_values(grid, grid.nodes)
    lifted = GridFunction.from_values(grid, grid.nodes + 0.3)
    a, _ = step_backward(base, 1.0 - dt, 1.0, problem, benchmark_model,
                         benchmark_basis, quad, cfg)
    b, _ = step_backward(lifted, 1.0 - dt, 1.0, problem, benchmark_model,
                         benchmark_basis, quad, cfg)
    np.testing.assert_allclose(b.values - a.values, 0.3, atol=1e-11)


def test_solution_reports_terminal_and_interpolates(benchmark_model,
                                                    benchmark_basis):
    problem = _problem(make_forward("linear", c1=1.0), make_terminal("identity"))
    grid = SpatialGrid(-1.0, 3.5, 24)
    sol = hjb_solve(problem, benchmark_model, benchmark_basis, grid, HjbConfig())
    np.testing.assert_allclose(sol.W[-1], grid.nodes, atol=1e-14)
    assert np.all(sol.policy[-1] == -1)
    t_mid = 0.5 * (sol.t_report[3] + sol.t_report[4])
    xs = np.array([1.0, 2.0])
    lo = sol.value_at(float(sol.t_report[3]), xs)
    hi = sol.value_at(float(sol.t_report[4]), xs)
    np.testing.assert_allclose(sol.value_at(float(t_mid), xs), 0.5 * (lo + hi),
                               rtol=1e-12)


def test_refinement_shrinks_benchmark_error(benchmark_model, benchmark_basis):
    problem = _problem(make_forward("linear", c1=1.0), make_terminal("identity"))
    grid = SpatialGrid(-1.0, 3.5, 24)
    oracle = lambda x: np.asarray(x) * math.exp(0.2)
    rows, base, fine = convergence_study(problem, benchmark_model,
                                         benchmark_basis, grid, HjbConfig(),
                                         oracle=oracle)
    assert len(rows) == 2
    assert rows[1].h == pytest.approx(rows[0].h / 2.0)
    assert rows[1].error < rows[0].error
    assert fine.grid.n_nodes == 2 * base.grid.n_nodes - 1
