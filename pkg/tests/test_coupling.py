from __future__ import annotations

import itertools

import numpy as np
import pytest

from trichotomy_lab.base.errors import CouplingInconsistencyError, PreconditionError, RateError
from trichotomy_lab.base.projections import validate_pair
from trichotomy_lab.base.rates import TabulatedRate
from trichotomy_lab.base.report import FLAG_PYTHAGORAS_DOWNGRADE, FLAG_REVERSIBLE_SUBCASE
from trichotomy_lab.base.settings import LabSettings
from trichotomy_lab.base.system import make_system
from trichotomy_lab.coupling.systems import (
    build_B,
    build_C,
    check_coupling_relation,
    check_scaling_B,
    check_scaling_C,
    couple,
)
from trichotomy_lab.coupling.theorems import (
    STAGE_COUPLING,
    STAGE_FORWARD_B,
    theorem1_forward,
    theorem2_forward,
    theorem3_reverse,
    theorem4_equivalence,
)
from trichotomy_lab.genlab.corruption import corrupt
from trichotomy_lab.genlab.fixtures import e2_embedded_spec, materialize
from trichotomy_lab.genlab.generators import BlockRole, BlockSpec, Defect, GeneratorSpec, Triple
from trichotomy_lab.verify.trichotomy import verify_trichotomy

RATES = {"exp": {"kind": "exp", "lambda": 2.0}, "poly": {"kind": "poly", "p": 1.0}}
EXPONENTS = [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)]
SUITE = list(
    itertools.product([1, 2], [1, 2], [0, 1, 2], sorted(RATES), [None, 11], EXPONENTS)
)


def test_build_b_on_e1(e1: Triple) -> None:
    system, _, params = e1
    sys_b = build_B(system, params.h, params.k, params.a, params.b)
    for coeff in sys_b.coeffs:
        np.testing.assert_allclose(coeff, np.diag([1.0, 4.0, 2.0]), rtol=1e-14)
    sys_c = build_C(system, params.h, params.k, params.a, params.b)
    np.testing.assert_allclose(sys_c.coeffs[0], np.diag([0.25, 1.0, 0.5]), rtol=1e-14)


def test_trivial_rescaling_is_identity(e1: Triple) -> None:
    flat = TabulatedRate.constant(1.0, 10)
    sys_b = build_B(e1.system, flat, flat, 1.0, 0.0)
    np.testing.assert_array_equal(sys_b.coeffs, e1.system.coeffs)
    with pytest.raises(RateError):
        build_B(e1.system, flat, flat, 0.0, 1.0)
    with pytest.raises(RateError):
        build_B(e1.system, TabulatedRate.constant(1.0, 5), flat, 1.0, 1.0)


def test_scaling_identities(e1_u: Triple) -> None:
    system, family, params = e1_u
    h, k, a, b = params.h, params.k, params.a, params.b
    pair = couple(system, family, h, k, a, b)
    assert check_scaling_B(system, pair.sys_b, h, k, a, b).passed
    assert check_scaling_C(system, pair.sys_c, h, k, a, b).passed
    assert check_coupling_relation(pair.sys_b, pair.sys_c, h, k, a, b).passed
    assert validate_pair(pair.S).passed
    assert validate_pair(pair.T).passed
    np.testing.assert_allclose(pair.tilde_h.values(np.arange(11)), 1.0)

    coeffs = np.array(pair.sys_c.coeffs)
    coeffs[6] *= 1.01
    tampered = make_system(3, coeffs)
    relation = check_coupling_relation(pair.sys_b, tampered, h, k, a, b)
    assert not relation.passed
    assert relation.location[1] <= 6 < relation.location[0]


def test_forward_directions(e1: Triple, settings: LabSettings) -> None:
    forward_b = theorem1_forward(*e1, settings=settings)
    assert forward_b.report.passed
    assert forward_b.report.k_min == pytest.approx(1.0)
    assert forward_b.report.stages[0].name == STAGE_FORWARD_B
    np.testing.assert_allclose(forward_b.splitting.first, e1.family.p1)

    forward_c = theorem2_forward(*e1, settings=settings)
    assert forward_c.report.passed
    np.testing.assert_allclose(forward_c.splitting.second, e1.family.p2)
    steps = np.arange(11)
    np.testing.assert_allclose(
        forward_c.rate.log_values(steps), -forward_b.rate.log_values(steps), atol=1e-12
    )


def test_forward_requires_trichotomy(e1: Triple) -> None:
    system, family, params = e1
    with pytest.raises(PreconditionError):
        theorem1_forward(system, family, params.model_copy(update={"K": 0.5}))


def test_reverse_recovers_base(e1_u: Triple, settings: LabSettings) -> None:
    system, family, params = e1_u
    pair = couple(system, family, params.h, params.k, params.a, params.b)
    result = theorem3_reverse(pair.sys_b, pair.S, pair.sys_c, pair.T, params, settings=settings)
    assert result.report.passed
    assert result.family.max_deviation(family) <= 1e-12
    np.testing.assert_allclose(result.system.coeffs, system.coeffs, rtol=1e-12, atol=1e-14)


def test_reverse_rejects_unrelated_systems(e1: Triple) -> None:
    system, family, params = e1
    pair = couple(system, family, params.h, params.k, params.a, params.b)
    with pytest.raises(CouplingInconsistencyError):
        theorem3_reverse(pair.sys_b, pair.S, pair.sys_b, pair.T, params)
    with pytest.raises(PreconditionError):
        theorem3_reverse(pair.sys_b, pair.T, pair.sys_c, pair.S, params)


@pytest.mark.parametrize(
    ("stable", "unstable", "central", "rate", "seed", "exponents"), SUITE
)
def test_equivalence_round_trip(
    stable: int,
    unstable: int,
    central: int,
    rate: str,
    seed: int | None,
    exponents: tuple[float, float],
    settings: LabSettings,
) -> None:
    a, b = exponents
    spec = GeneratorSpec(
        horizon=6,
        blocks=[
            BlockSpec(role=BlockRole.STABLE, dim=stable),
            BlockSpec(role=BlockRole.UNSTABLE, dim=unstable),
            BlockSpec(role=BlockRole.CENTRAL, dim=central),
        ],
        h=RATES[rate],
        k=RATES[rate],
        a=a,
        b=b,
        rotation_seed=seed,
    )
    report = theorem4_equivalence(*materialize(spec), settings=settings)
    assert report.passed, report.failed_stage()
    assert report.failed_stage() is None
    assert report.metrics["family_error"] <= 1e-12
    assert report.metrics["system_error"] <= 1e-12
    assert report.metrics["k_min"] <= 1.0 + 1e-9


def test_nonuniform_equivalence_round_trip(e2_embedded: Triple, settings: LabSettings) -> None:
    spec = e2_embedded_spec(40)
    assert spec.nonuniform is not None
    report = theorem4_equivalence(*e2_embedded, settings=settings)
    assert report.passed, report.failed_stage()
    assert report.stages
    assert all(stage.passed for stage in report.stages)
    assert report.metrics["eps"] == pytest.approx(2 * spec.nonuniform.eps)
    assert report.metrics["eps"] == e2_embedded.params.eps


def test_equivalence_without_central_block(e1_dichotomy: Triple) -> None:
    report = theorem4_equivalence(*e1_dichotomy)
    assert report.passed
    assert FLAG_REVERSIBLE_SUBCASE in report.flags


def test_equivalence_detects_tampered_c_system(e1: Triple) -> None:
    system, family, params = e1
    sys_c = build_C(system, params.h, params.k, params.a, params.b)
    coeffs = np.array(sys_c.coeffs)
    coeffs[4, 1, 1] *= 1.5
    report = theorem4_equivalence(system, family, params, sys_c=make_system(3, coeffs))
    assert not report.passed
    assert report.failed_stage() == STAGE_COUPLING


def test_oblique_ranges_downgrade_the_constant(e1: Triple) -> None:
    system, family, params = corrupt(e1, Defect.SKEW_PROJECTIONS)
    k_min = verify_trichotomy(system, family, params).k_min
    assert k_min > 1.0
    forward = theorem1_forward(system, family, params.model_copy(update={"K": k_min * 1.000001}))
    assert FLAG_PYTHAGORAS_DOWNGRADE in forward.report.flags
    assert forward.report.declared_k == pytest.approx(np.sqrt(2.0) * k_min * 1.000001)
    assert not forward.report.check("range-orthogonality").passed
