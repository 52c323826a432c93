from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from trichotomy_lab.base.errors import GeneratorError
from trichotomy_lab.base.projections import (
    check_invariance,
    check_range_orthogonality,
    validate_tri,
)
from trichotomy_lab.genlab.corruption import corrupt
from trichotomy_lab.genlab.fixtures import FIXTURES, alternating_spec, fixture, materialize
from trichotomy_lab.genlab.generators import (
    BlockRole,
    BlockSpec,
    Defect,
    GeneratorSpec,
    NonuniformSpec,
    Triple,
    gen_nonuniform_scalar,
    random_rotations,
    rotate,
)
from trichotomy_lab.verify.spectral import check_kernel_isomorphism
from trichotomy_lab.verify.trichotomy import verify_trichotomy


def test_e1_coefficients_and_certificate(e1: Triple) -> None:
    system, family, params = e1
    assert system.dim == 3
    assert system.horizon == 10
    for coeff in system.coeffs:
        np.testing.assert_allclose(coeff, np.diag([0.5, 2.0, 1.0]), rtol=1e-14)
    np.testing.assert_array_equal(family.p1[7], np.diag([1.0, 0.0, 0.0]))
    assert (params.K, params.a, params.b, params.eps) == (1.0, 1.0, 1.0, 0.0)
    np.testing.assert_allclose(params.mu.values([0, 4]), [1.0, 5.0])


def test_alternating_central_block() -> None:
    system, _, params = materialize(alternating_spec(4))
    np.testing.assert_allclose(system.coeffs[:, 2, 2], [2.0, 0.5, 2.0, 0.5])
    assert params.K == 2.0
    assert params.h.value(3) == pytest.approx(4.0)


@pytest.mark.parametrize(
    "fields",
    [
        {"horizon": 5, "blocks": [{"role": "stable", "dim": 0}]},
        {"horizon": 0, "blocks": [{"role": "stable", "dim": 1}]},
        {"horizon": 5, "blocks": []},
        {"horizon": 5, "blocks": [{"role": "stable", "dim": 1}], "h": {"kind": "exp"}},
        {
            "horizon": 5,
            "blocks": [{"role": "stable", "dim": 1}],
            "a": 0.5,
            "nonuniform": {"eps": 0.5},
        },
    ],
)
def test_generator_spec_rejects(fields: dict[str, object]) -> None:
    with pytest.raises(ValidationError):
        GeneratorSpec.model_validate(fields)


def test_nonuniform_scalar() -> None:
    certificate = gen_nonuniform_scalar(1.0, 0.25, 6)
    system, _, params = certificate.triple
    steps = np.arange(6)
    expected = np.exp(-1.0 + 0.25 * (-1.0) ** (steps + 1) * (2 * steps + 1))
    np.testing.assert_allclose(system.coeffs[:, 0, 0], expected, rtol=1e-13)
    assert params.a == pytest.approx(0.75)
    assert params.eps == pytest.approx(0.5)
    assert params.mu.value(3) == pytest.approx(math.e**3)

    uniform = gen_nonuniform_scalar(1.0, 0.0, 6)
    assert uniform.triple.params.eps == 0.0
    assert uniform.triple.params.nu.value(2) == pytest.approx(math.e**2)
    assert gen_nonuniform_scalar(1.0, 0.25, 1).witness is None

    with pytest.raises(GeneratorError):
        gen_nonuniform_scalar(1.0, 1.0, 6)


def test_nonuniform_block_of_larger_system() -> None:
    spec = GeneratorSpec(
        horizon=8,
        blocks=[BlockSpec(role=BlockRole.STABLE, dim=2), BlockSpec(role=BlockRole.CENTRAL, dim=1)],
        h={"kind": "exp", "lambda": math.e},
        k={"kind": "exp", "lambda": math.e},
        a=2.0,
        nonuniform=NonuniformSpec(eps=0.5),
    )
    triple = materialize(spec)
    assert triple.params.a == pytest.approx(1.5)
    assert verify_trichotomy(*triple).passed


def test_random_rotations_are_seeded_and_orthogonal() -> None:
    rotations = random_rotations(4, 5, seed=9)
    assert rotations.shape == (5, 4, 4)
    np.testing.assert_allclose(rotations @ np.swapaxes(rotations, -1, -2), np.eye(4), atol=1e-12)
    np.testing.assert_array_equal(rotations, random_rotations(4, 5, seed=9))
    assert set(np.unique(random_rotations(1, 20, seed=2))) <= {-1.0, 1.0}


def test_rotation_keeps_orthogonal_projections(e1: Triple, e1_u: Triple) -> None:
    for p in e1_u.family.components[:, :3].reshape(-1, 3, 3):
        np.testing.assert_allclose(p, p.T, atol=1e-12)
    assert check_invariance(e1_u.system, e1_u.family).passed
    assert check_range_orthogonality(e1_u.family).passed

    with pytest.raises(GeneratorError):
        rotate(e1, np.ones((11, 3, 3)))
    with pytest.raises(GeneratorError):
        rotate(e1, random_rotations(3, 5, seed=0))


def test_every_fixture_is_valid() -> None:
    for name in FIXTURES:
        system, family, _ = fixture(name)
        assert validate_tri(family).passed, name
        assert check_invariance(system, family).passed, name
    with pytest.raises(GeneratorError, match="unknown fixture"):
        fixture("e3")


def test_break_annihilation(e1: Triple) -> None:
    system, family, _ = corrupt(e1, Defect.BREAK_ANNIHILATION)
    result = validate_tri(family)
    assert not result.passed
    assert result.child("idempotence").passed
    assert not result.child("annihilation").passed
    assert check_invariance(system, family).passed


def test_break_invariance(e1: Triple) -> None:
    system, family, _ = corrupt(e1, "break-invariance")
    assert validate_tri(family).passed
    assert not check_invariance(system, family).passed


def test_kill_kernel_direction(e1: Triple) -> None:
    system, family, params = corrupt(e1, Defect.KILL_KERNEL_DIRECTION)
    assert validate_tri(family).passed
    assert check_invariance(system, family).passed
    kernel = check_kernel_isomorphism(system, family)
    assert not kernel.passed
    assert kernel.child("kernel-2").location == [3, 2]
    assert not verify_trichotomy(system, family, params).passed


def test_skew_projections(e1: Triple) -> None:
    system, family, _ = corrupt(e1, Defect.SKEW_PROJECTIONS)
    assert validate_tri(family).passed
    assert check_invariance(system, family).passed
    assert not check_range_orthogonality(family).passed


def test_corrupt_rejects_unusable_requests(e1: Triple) -> None:
    with pytest.raises(GeneratorError, match="unknown defect"):
        corrupt(e1, "flip-signs")
    scalar = gen_nonuniform_scalar(1.0, 0.25, 6).triple
    with pytest.raises(GeneratorError):
        corrupt(scalar, Defect.BREAK_INVARIANCE)
    with pytest.raises(GeneratorError):
        corrupt(scalar, Defect.BREAK_ANNIHILATION)


def test_spec_level_corruption() -> None:
    spec = GeneratorSpec(
        horizon=6,
        blocks=[BlockSpec(role=BlockRole.STABLE, dim=1), BlockSpec(role=BlockRole.UNSTABLE, dim=1)],
        corruption=Defect.SKEW_PROJECTIONS,
    )
    _, family, _ = materialize(spec)
    assert not check_range_orthogonality(family).passed
