import math

import numpy as np
import pytest

from teugels_control import JumpMeasure, LevyModel, validate


def test_point_mass_moments():
    jm = JumpMeasure.point_masses([(1.0, 0.5), (-2.0, 0.25)])
    for i in range(1, 6):
        expected = 0.5 * 1.0 ** i + 0.25 * (-2.0) ** i
        assert jm.raw_moment(i) == pytest.approx(expected, rel=1e-14)


def test_two_sided_exponential_moments():
    lam, p, alpha, beta = 1.5, 0.4, 2.0, 3.0
    jm = JumpMeasure.two_sided_exponential(lam, p, alpha, beta)
    for i in range(1, 6):
        expected = lam * math.factorial(i) * (
            p / alpha ** i + (1.0 - p) * (-1.0) ** i / beta ** i)
        assert jm.raw_moment(i) == pytest.approx(expected, rel=1e-12)


def test_mean_rate_adds_drift(benchmark_model):
    assert benchmark_model.moment(1) == pytest.approx(0.2)
    assert benchmark_model.moment(2) == pytest.approx(0.3)


def test_mean_rate_mixed(mixed_model):
    # b = 0 and jumps below size 1 are compensated, so the mean rate is the
    # first moment over |x| >= 1: integral_1^inf x a e^{-ax} dx = e^{-a}(1 + 1/a)
    up = math.exp(-2.0) * (1.0 + 1.0 / 2.0)
    dn = math.exp(-3.0) * (1.0 + 1.0 / 3.0)
    assert mixed_model.moment(1) == pytest.approx(0.5 * up - 0.5 * dn)


def test_mu_inner_diffusion_only_in_corner(benchmark_model):
    m = benchmark_model
    assert m.mu_inner(0, 0) == pytest.approx(m.jumps.raw_moment(2) + m.sigma2)
    assert m.mu_inner(1, 0) == pytest.approx(m.jumps.raw_moment(3))
    assert m.mu_inner(1, 1) == pytest.approx(m.jumps.raw_moment(4))


def test_gram_is_symmetric_psd(mixed_model):
    g = mixed_model.gram(4)
    np.testing.assert_allclose(g, g.T, rtol=1e-13)
    evals = np.linalg.eigvalsh(g)
    assert evals.min() > 0.0


def test_moment_index_bounds(benchmark_model):
    with pytest.raises(ValueError):
        benchmark_model.moment(0)
    with pytest.raises(ValueError):
        benchmark_model.moment(benchmark_model.i_max + 1)


def test_jump_measure_validation():
    with pytest.raises(ValueError):
        JumpMeasure.point_masses([(0.0, 1.0)])
    with pytest.raises(ValueError):
        JumpMeasure.point_masses([(1.0, -1.0)])
    with pytest.raises(ValueError):
        JumpMeasure.two_sided_exponential(-1.0, 0.5, 2.0, 3.0)
    with pytest.raises(ValueError):
        JumpMeasure.two_sided_exponential(1.0, 1.5, 2.0, 3.0)


def test_model_validation():
    with pytest.raises(ValueError):
        LevyModel(b=0.0, sigma2=-1.0, jumps=JumpMeasure.none())


def test_validate_flags_degeneracies():
    notes = validate(LevyModel(b=1.0, sigma2=0.0, jumps=JumpMeasure.none()))
    assert any("deterministic" in n for n in notes)
    notes = validate(LevyModel(b=0.0, sigma2=0.0,
                               jumps=JumpMeasure.point_masses([(1.0, 1.0)])))
    assert any("rank" in n for n in notes)
    assert validate(LevyModel(b=0.0, sigma2=1.0, jumps=JumpMeasure.none())) == []
