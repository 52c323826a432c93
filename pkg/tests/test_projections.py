from __future__ import annotations

import numpy as np
import pytest

from trichotomy_lab.base.errors import (
    DimensionMismatchError,
    FamilyError,
    IncompatibleSplittingError,
)
from trichotomy_lab.base.projections import (
    DiProjectionFamily,
    TriProjectionFamily,
    check_invariance,
    check_range_orthogonality,
    check_ST_identities,
    four_to_tri,
    kernel_basis,
    make_S,
    make_T,
    range_basis,
    reconstruct_P3,
    tri_from_pair,
    tri_to_four,
    tri_to_two,
    validate_pair,
    validate_tri,
)
from trichotomy_lab.genlab.generators import Triple

E1, E2, E3 = np.diag([1.0, 0.0, 0.0]), np.diag([0.0, 1.0, 0.0]), np.diag([0.0, 0.0, 1.0])


def test_family_shape_is_checked() -> None:
    with pytest.raises(DimensionMismatchError):
        TriProjectionFamily(np.zeros((3, 2, 2, 2)))
    with pytest.raises(DimensionMismatchError):
        TriProjectionFamily.from_components(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)))


def test_validate_tri_accepts_coordinate_splitting() -> None:
    fam = TriProjectionFamily.constant(E1, E2, E3, horizon=4)
    assert validate_tri(fam).passed
    fam.require_valid()


def test_validate_tri_names_the_broken_clause() -> None:
    p1 = E1 - np.outer([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    fam = TriProjectionFamily.constant(p1, E2, E3, horizon=2)
    result = validate_tri(fam)
    assert not result.passed
    assert result.child("idempotence").passed
    assert not result.child("annihilation").passed
    with pytest.raises(FamilyError):
        fam.require_valid()


def test_validate_pair_does_not_need_resolution() -> None:
    pair = DiProjectionFamily.constant(E1, E2, horizon=3)
    assert validate_pair(pair).passed
    assert not pair.validate().passed


def test_tri_two_four_round_trips(e1_u: Triple) -> None:
    fam = e1_u.family
    pair = tri_to_two(fam)
    np.testing.assert_allclose(pair.first, fam.p1, atol=1e-14)
    np.testing.assert_allclose(pair.second, fam.p2 + fam.p3, atol=1e-14)

    quad = tri_to_four(fam)
    assert quad.validate().passed
    assert four_to_tri(quad).max_deviation(fam) <= 1e-14

    orthogonal = DiProjectionFamily.from_components(fam.p1, fam.p2)
    assert tri_from_pair(orthogonal).max_deviation(fam) <= 1e-14


def test_tri_from_pair_biconditional() -> None:
    assert validate_tri(tri_from_pair(DiProjectionFamily.constant(E1, E2, horizon=2))).passed
    skew = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert not validate_pair(DiProjectionFamily.constant(skew, E2, horizon=2)).passed
    assert not validate_tri(tri_from_pair(DiProjectionFamily.constant(skew, E2, horizon=2))).passed


def test_s_t_identities_and_reconstruction(e1_u: Triple) -> None:
    fam = e1_u.family
    s, t = make_S(fam), make_T(fam)
    identities = check_ST_identities(s, t)
    assert identities.passed
    assert identities.worst <= 1e-12
    assert reconstruct_P3(s, t).max_deviation(fam) <= 1e-12


def test_reconstruct_refuses_incompatible_splittings() -> None:
    s = DiProjectionFamily.constant(E1, E2 + E3, horizon=2)
    t = DiProjectionFamily.constant(E2 + E3, E1, horizon=2)
    with pytest.raises(IncompatibleSplittingError):
        reconstruct_P3(s, t)


def test_reconstruct_with_trivial_central_block(e1_dichotomy: Triple) -> None:
    fam = e1_dichotomy.family
    rebuilt = reconstruct_P3(make_S(fam), make_T(fam))
    np.testing.assert_array_equal(rebuilt.p3, np.zeros_like(fam.p3))


def test_invariance(e1: Triple, e1_u: Triple) -> None:
    assert check_invariance(e1.system, e1.family).passed
    assert check_invariance(e1_u.system, e1_u.family).passed

    swapped = TriProjectionFamily.constant(E2, E1, E3, horizon=10)
    assert check_invariance(e1.system, swapped).passed

    mixed = np.full((3, 3), 1.0 / 3.0)
    bad = TriProjectionFamily.constant(mixed, np.zeros((3, 3)), np.eye(3) - mixed, horizon=10)
    result = check_invariance(e1.system, bad)
    assert not result.passed
    assert result.location[0] == 0


def test_range_orthogonality(e1_u: Triple) -> None:
    assert check_range_orthogonality(e1_u.family).passed

    skew = np.array([[1.0, 1.0], [0.0, 0.0]])
    oblique = DiProjectionFamily.constant(skew, np.eye(2) - skew, horizon=1)
    assert oblique.validate().passed
    result = check_range_orthogonality(oblique)
    assert result.name == "range-orthogonality"
    assert [c.name for c in result.children] == ["pairwise-orthogonality", "pythagoras"]
    assert not result.passed
    assert not result.child("pairwise-orthogonality").passed
    assert not result.child("pythagoras").passed


def test_range_and_kernel_bases() -> None:
    p = np.array([[1.0, 1.0], [0.0, 0.0]])
    r, k = range_basis(p), kernel_basis(p)
    assert r.shape == (2, 1)
    assert k.shape == (2, 1)
    np.testing.assert_allclose(p @ k, 0.0, atol=1e-14)
    np.testing.assert_allclose(abs(r[:, 0]), [1.0, 0.0], atol=1e-14)
    assert range_basis(np.zeros((3, 3))).shape == (3, 0)
    assert kernel_basis(np.eye(3)).shape == (3, 0)
