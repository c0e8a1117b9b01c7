import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teugels_control import (JumpMeasure, LevyModel, build_basis, eval_p,
                             eval_q, verify_orthonormal)


def test_frozen_two_by_two_coefficients():
    """Unit diffusion plus a unit mass at one: both Gram rows are known."""
    model = LevyModel(b=0.0, sigma2=1.0,
                      jumps=JumpMeasure.point_masses([(1.0, 1.0)]))
    basis = build_basis(model, 2)
    assert basis.K == 2
    assert basis.a(1, 1) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    assert basis.a(2, 1) == pytest.approx(-math.sqrt(2.0) / 2.0, abs=1e-12)
    assert basis.a(2, 2) == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_orthonormality_defect_small(mixed_model):
    basis = build_basis(mixed_model, 4)
    assert verify_orthonormal(basis) < 1e-10


def test_transform_is_lower_triangular(mixed_model):
    basis = build_basis(mixed_model, 3)
    np.testing.assert_array_equal(np.triu(basis.A, 1), 0.0)
    assert np.all(np.diag(basis.A) > 0.0)


def test_p_is_x_times_q(mixed_model):
    basis = build_basis(mixed_model, 3)
    x = np.linspace(-2.0, 2.0, 17)
    for i in range(1, basis.K + 1):
        np.testing.assert_allclose(eval_p(basis, i, x), x * eval_q(basis, i, x),
                                   rtol=1e-12, atol=1e-12)


def test_request_above_rank_is_capped():
    model = LevyModel(b=0.0, sigma2=0.0,
                      jumps=JumpMeasure.point_masses([(1.0, 1.0), (2.0, 0.5)]),
                      i_max=12)
    basis = build_basis(model, 5)
    assert basis.K == 2
    assert basis.requested_K == 5


@st.composite
def atom_sets(draw):
    n = draw(st.integers(min_value=1, max_value=3))
    locs = draw(st.lists(
        st.floats(min_value=0.25, max_value=2.0).map(lambda v: round(v, 2)),
        min_size=n, max_size=n, unique=True))
    signs = draw(st.lists(st.sampled_from((-1.0, 1.0)), min_size=n, max_size=n))
    lams = draw(st.lists(st.floats(min_value=0.1, max_value=2.0),
                         min_size=n, max_size=n))
    return [(loc * s, lam) for loc, s, lam in zip(locs, signs, lams)]


@settings(max_examples=60, deadline=None)
@given(atoms=atom_sets(), sigma2=st.sampled_from((0.0, 0.5, 1.0)))
def test_rank_equals_atoms_plus_diffusion(atoms, sigma2):
    """Moment-matrix rank: one per distinct atom, one more for diffusion."""
    locations = {loc for loc, _ in atoms}
    if sigma2 == 0.0 and not atoms:
        return
    model = LevyModel(b=0.0, sigma2=sigma2,
                      jumps=JumpMeasure.point_masses(atoms), i_max=12)
    built = build_basis(model, len(atoms) + 2)
    assert built.K == len(locations) + (1 if sigma2 > 0.0 else 0)
    assert verify_orthonormal(built) < 1e-7


def test_brownian_basis_is_one_dimensional():
    model = LevyModel(b=0.5, sigma2=2.0, jumps=JumpMeasure.none())
    basis = build_basis(model, 3)
    assert basis.K == 1
    assert basis.a(1, 1) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-14)
