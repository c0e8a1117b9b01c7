import math

import numpy as np
import pytest

from teugels_control import (ControlProblem, DpConfig, ValueLattice, child_seed,
                             dpp_residual, forward_simulate, make_control_driver,
                             make_forward, make_terminal, regularity_diagnostics,
                             value_dp, verify_lipschitz)


def _problem(forward, terminal, controls, lipschitz):
    return ControlProblem(forward=forward, driver=make_control_driver("zero"),
                          terminal=terminal, controls=controls, horizon=1.0,
                          lipschitz=lipschitz)


@pytest.fixture(scope="module")
def linear_problem():
    return _problem(make_forward("linear", c1=1.0), make_terminal("identity"),
                    (0.0,), (1.0, 0.0, 0.0))


def test_terminal_slice_is_exact(benchmark_model, benchmark_basis, linear_problem):
    lattice = ValueLattice(np.linspace(0.0, 1.0, 3), np.linspace(0.0, 3.0, 7))
    est = value_dp(linear_problem, benchmark_model, benchmark_basis, lattice,
                   DpConfig(n_paths=500, substeps=4, seed=1))
    np.testing.assert_array_equal(est.W[-1], lattice.x_nodes)
    np.testing.assert_array_equal(est.stderr[-1], 0.0)
    assert np.all(est.policy[-1] == -1)


def test_constant_terminal_value_is_constant(benchmark_model, benchmark_basis):
    problem = _problem(make_forward("linear", c1=1.0),
                       make_terminal("constant", value=5.0), (0.0,),
                       (1.0, 0.0, 0.0))
    lattice = ValueLattice(np.linspace(0.0, 1.0, 5), np.linspace(0.0, 3.0, 7))
    cfg = DpConfig(n_paths=400, substeps=4, seed=3)
    est = value_dp(problem, benchmark_model, benchmark_basis, lattice, cfg)
    np.testing.assert_allclose(est.W, 5.0, atol=1e-10)
    rep = dpp_residual(problem, benchmark_model, benchmark_basis, lattice, cfg,
                       0.25, 1.5, 0.25, estimate=est)
    assert rep.residual < 1e-10


def test_linear_growth_benchmark(benchmark_model, benchmark_basis, linear_problem):
    lattice = ValueLattice(np.linspace(0.0, 1.0, 5), np.linspace(0.5, 2.5, 9))
    est = value_dp(linear_problem, benchmark_model, benchmark_basis, lattice,
                   DpConfig(n_paths=4000, substeps=4, seed=17))
    w_true = lattice.x_nodes * math.exp(0.2)
    err = np.abs(est.W[0] - w_true)
    assert np.all(err <= 0.01 * w_true + 3.0 * est.stderr[0])


def test_extra_control_cannot_raise_value(benchmark_model, benchmark_basis):
    terminal = make_terminal("quadratic", scale=1.0)
    few = _problem(make_forward("affine_u", c2=1.0), terminal, (1.0,),
                   (0.0, 0.0, 0.0))
    more = _problem(make_forward("affine_u", c2=1.0), terminal, (-1.0, 1.0),
                    (0.0, 0.0, 0.0))
    lattice = ValueLattice(np.linspace(0.0, 1.0, 4), np.linspace(-2.0, 2.0, 9))
    est_few = value_dp(few, benchmark_model, benchmark_basis, lattice,
                       DpConfig(n_paths=2000, substeps=4, seed=21))
    est_more = value_dp(more, benchmark_model, benchmark_basis, lattice,
                        DpConfig(n_paths=2000, substeps=4, seed=21))
    slack = 3.0 * (est_few.stderr[0] + est_more.stderr[0])
    assert np.all(est_more.W[0] <= est_few.W[0] + slack)


def test_dpp_probe_must_hit_lattice_nodes(benchmark_model, benchmark_basis,
                                          linear_problem):
    lattice = ValueLattice(np.linspace(0.0, 1.0, 5), np.linspace(0.0, 3.0, 7))
    cfg = DpConfig(n_paths=300, substeps=2, seed=5)
    with pytest.raises(ValueError):
        dpp_residual(linear_problem, benchmark_model, benchmark_basis, lattice,
                     cfg, 0.1, 1.0, 0.25)
    with pytest.raises(ValueError):
        dpp_residual(linear_problem, benchmark_model, benchmark_basis, lattice,
                     cfg, 0.25, 1.0, 0.1)


def test_forward_simulate_constant_coefficient(benchmark_model, benchmark_basis,
                                               small_ensemble):
    problem = _problem(make_forward("constant", c0=1.0),
                       make_terminal("identity"), (0.0,), (0.0, 0.0, 0.0))
    states = forward_simulate(problem, small_ensemble, 0.5, 0.0)
    np.testing.assert_allclose(states, 0.5 + small_ensemble.levy_values(),
                               atol=1e-12)


def test_child_seed_is_stable_and_distinct():
    assert child_seed(7, 1, 2) == child_seed(7, 1, 2)
    seen = {child_seed(7, j) for j in range(50)}
    assert len(seen) == 50


def test_regularity_of_linear_value(benchmark_model, benchmark_basis,
                                    linear_problem):
    lattice = ValueLattice(np.linspace(0.0, 1.0, 4), np.linspace(0.5, 2.5, 7))
    est = value_dp(linear_problem, benchmark_model, benchmark_basis, lattice,
                   DpConfig(n_paths=2000, substeps=4, seed=9))
    rep = regularity_diagnostics(est)
    assert rep.finite
    # slope of x e^{0.2 (1 - t)} stays within e^{0.2} plus estimator noise
    assert 0.8 < rep.c_x < 1.4


def test_verify_lipschitz_flags_understated_constant():
    good = _problem(make_forward("linear", c1=1.0), make_terminal("identity"),
                    (0.0,), (1.0, 0.0, 0.0))
    assert verify_lipschitz(good, -2.0, 2.0) == []
    bad = _problem(make_forward("linear", c1=1.0), make_terminal("identity"),
                   (0.0,), (0.5, 0.0, 0.0))
    notes = verify_lipschitz(bad, -2.0, 2.0)
    assert any("exceeds declared" in n for n in notes)
