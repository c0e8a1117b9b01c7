import numpy as np
import pytest

from teugels_control import (build_basis, empirical_bracket, reconstruct_L,
                             simulate, simulate_ensemble, teugels_increments)


def test_same_seed_reproduces(benchmark_model):
    a = simulate(benchmark_model, 0.0, 1.0, 32, 7, path_index=3)
    b = simulate(benchmark_model, 0.0, 1.0, 32, 7, path_index=3)
    np.testing.assert_array_equal(a.diffusion_increments, b.diffusion_increments)
    np.testing.assert_array_equal(a.jump_sizes, b.jump_sizes)


def test_distinct_path_index_differs(benchmark_model):
    a = simulate(benchmark_model, 0.0, 1.0, 32, 7, path_index=0)
    b = simulate(benchmark_model, 0.0, 1.0, 32, 7, path_index=1)
    assert not np.array_equal(a.diffusion_increments, b.diffusion_increments)


def test_grid_values_cumulate_increments(benchmark_model):
    path = simulate(benchmark_model, 0.0, 2.0, 40, 11)
    vals = path.grid_values()
    assert vals[0] == 0.0
    np.testing.assert_allclose(np.diff(vals), path.step_increments(), atol=1e-14)


def test_reconstruction_roundtrip(benchmark_model, benchmark_basis):
    """Power-jump recombination returns the raw increments to roundoff."""
    for idx in range(20):
        path = simulate(benchmark_model, 0.0, 1.0, 64, 2024, path_index=idx)
        inc = teugels_increments(path, benchmark_basis)
        np.testing.assert_allclose(reconstruct_L(inc, benchmark_basis),
                                   path.step_increments(), atol=1e-12)


def test_ensemble_shapes(small_ensemble):
    ens = small_ensemble
    assert ens.n_paths == 4000
    assert ens.n_steps == 25
    assert ens.dL.shape == (4000, 25)
    assert ens.dH.shape == (4000, 25, 2)
    assert ens.levy_values().shape == (4000, 26)


def test_ensemble_mean_rate(small_ensemble, benchmark_model):
    l_final = small_ensemble.levy_values()[:, -1]
    se = np.std(l_final, ddof=1) / np.sqrt(len(l_final))
    assert abs(np.mean(l_final) - benchmark_model.moment(1)) < 5.0 * se


def test_bracket_matrix_near_identity(small_ensemble):
    for i in (1, 2):
        for j in (1, 2):
            mean, se = empirical_bracket(small_ensemble, i, j)
            expected = 1.0 if i == j else 0.0
            assert abs(mean - expected) < 5.0 * se


def test_bracket_rejects_bad_component(small_ensemble):
    with pytest.raises(ValueError):
        empirical_bracket(small_ensemble, 0, 1)
    with pytest.raises(ValueError):
        empirical_bracket(small_ensemble, 1, 3)


def test_span_of_ensemble_matches_request(benchmark_model, benchmark_basis):
    # the fourth argument is the absolute end time, not a duration
    ens = simulate_ensemble(benchmark_model, benchmark_basis, 0.5, 0.75, 10,
                            50, 5)
    assert ens.times[0] == pytest.approx(0.5)
    assert ens.times[-1] == pytest.approx(0.75)
    assert ens.dt == pytest.approx(0.025)
    with pytest.raises(ValueError):
        simulate_ensemble(benchmark_model, benchmark_basis, 1.0, 0.5, 10, 50, 5)
