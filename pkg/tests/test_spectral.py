from __future__ import annotations

import math

import numpy as np
import pytest

from trichotomy_lab.base.errors import DimensionMismatchError, FamilyError
from trichotomy_lab.base.rates import ExponentialRate
from trichotomy_lab.base.report import FLAG_REVERSIBLE_SUBCASE
from trichotomy_lab.base.settings import LabSettings
from trichotomy_lab.base.system import make_system
from trichotomy_lab.genlab.fixtures import FIXTURES, e2_spec, materialize
from trichotomy_lab.genlab.generators import Triple, gen_nonuniform_scalar
from trichotomy_lab.genlab.oracle import oracle_kmin
from trichotomy_lab.verify.params import BoundParams
from trichotomy_lab.verify.spectral import (
    Envelope,
    InequalityPattern,
    check_kernel_isomorphism,
    evaluate_witness,
    kmin_backward,
    kmin_forward,
    restricted_extremes,
    sweep_kmin,
)
from trichotomy_lab.verify.trichotomy import STABLE_FORWARD, trichotomy_patterns


def _stable_pattern(params: BoundParams) -> InequalityPattern:
    return next(p for p in trichotomy_patterns(params) if p.name == STABLE_FORWARD)


def test_restricted_extremes() -> None:
    m = np.diag([3.0, 1.0])
    assert restricted_extremes(m, np.array([[1.0], [0.0]]))[:2] == pytest.approx((3.0, 3.0))
    assert restricted_extremes(m, np.eye(2))[:2] == pytest.approx((3.0, 1.0))
    empty = restricted_extremes(m, np.zeros((2, 0)))
    assert empty.vacuous
    assert empty.sigma_max == 0.0
    assert math.isinf(empty.sigma_min)
    with pytest.raises(DimensionMismatchError):
        restricted_extremes(m, np.array([[1.0], [1.0]]))
    with pytest.raises(DimensionMismatchError):
        restricted_extremes(m, np.eye(3))


def test_e1_sharp_constants(e1: Triple, settings: LabSettings) -> None:
    system, family, params = e1
    for pattern in trichotomy_patterns(params):
        result = sweep_kmin(
            system, family.component(pattern.component), pattern, 10, settings=settings
        )
        assert 1.0 <= result.k_min <= 1.0 + 1e-9, pattern.name
        assert result.witness is not None


@pytest.mark.parametrize("window", [20, 40, 80])
def test_e2_certificate_is_window_stable(window: int, settings: LabSettings) -> None:
    system, family, params = materialize(e2_spec(80))
    assert params.a == pytest.approx(0.75)
    assert params.eps == pytest.approx(0.5)
    result = sweep_kmin(system, family.p1, _stable_pattern(params), window, settings=settings)
    assert result.k_min == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("window", [40, 80])
def test_e2_uniform_constant_grows(window: int, settings: LabSettings) -> None:
    system, family, params = materialize(e2_spec(80))
    uniform = params.model_copy(update={"eps": 0.0})
    result = sweep_kmin(system, family.p1, _stable_pattern(uniform), window, settings=settings)
    assert result.k_min == pytest.approx(math.exp((window - 1) / 2), rel=1e-6)
    assert result.witness == (window, window - 1)


def test_backward_bound_on_singular_restriction_is_infinite() -> None:
    system = make_system(1, [[[0.0]], [[1.0]]])
    projections = np.ones((3, 1, 1))
    result = kmin_backward(system, projections, Envelope(ExponentialRate(2.0), 1.0), 2)
    assert math.isinf(result.k_min)
    assert result.witness == (1, 0)


def test_zero_projection_is_vacuous(e1: Triple) -> None:
    result = kmin_forward(e1.system, np.zeros((11, 3, 3)), Envelope(e1.params.h, 1.0), 10)
    assert result.vacuous
    assert result.k_min == 0.0
    assert result.witness is None


def test_sweep_checks_invariance(e1: Triple) -> None:
    mixed = np.broadcast_to(np.full((3, 3), 1.0 / 3.0), (11, 3, 3))
    with pytest.raises(FamilyError):
        kmin_forward(e1.system, mixed, Envelope(e1.params.h, 1.0), 10)


def test_sweep_is_independent_of_thread_count(e1_u: Triple) -> None:
    system, family, params = e1_u
    pattern = _stable_pattern(params)
    serial = sweep_kmin(system, family.p1, pattern, 10, settings=LabSettings(threads=1))
    parallel = sweep_kmin(system, family.p1, pattern, 10, settings=LabSettings(threads=8))
    assert serial == parallel


def test_witness_reproduces_constant(e1_u: Triple, e2: Triple) -> None:
    for system, family, params in (e1_u, e2):
        for pattern in trichotomy_patterns(params):
            result = sweep_kmin(system, family.component(pattern.component), pattern, 10)
            if result.vacuous:
                continue
            replay = evaluate_witness(system, result, pattern.envelope)
            assert replay == pytest.approx(result.k_min, rel=1e-9)


def test_nonuniform_scalar_witness() -> None:
    certificate = gen_nonuniform_scalar(1.0, 0.25, 10)
    system, family, params = certificate.triple
    result = sweep_kmin(system, family.p1, _stable_pattern(params), 10)
    assert result.k_min == pytest.approx(1.0, abs=1e-9)
    assert certificate.witness == (2, 1)
    replay = Envelope(params.h, params.a, params.mu, params.eps).value(2, 1)
    assert float(system.cache.get(2, 1)[0, 0]) / replay == pytest.approx(1.0, rel=1e-12)


def test_oracle_never_exceeds_spectral(e1_u: Triple, settings: LabSettings) -> None:
    system, family, params = e1_u
    for pattern in trichotomy_patterns(params):
        stack = family.component(pattern.component)
        spectral = sweep_kmin(system, stack, pattern, 10, settings=settings)
        sampled = oracle_kmin(system, stack, pattern, 10, samples=50, seed=1, settings=settings)
        assert sampled <= spectral.k_min * (1 + 1e-12)
        # one-dimensional ranges: every unit vector is extremal
        assert sampled == pytest.approx(spectral.k_min, rel=1e-6)


def test_oracle_lower_bound_on_two_dimensional_range(settings: LabSettings) -> None:
    rng = np.random.default_rng(5)
    system = make_system(2, rng.standard_normal((6, 2, 2)))
    stack = np.broadcast_to(np.eye(2), (7, 2, 2))
    pattern = _stable_pattern(
        BoundParams(
            K=1.0,
            a=0.5,
            b=0.0,
            h=ExponentialRate(2.0),
            k=ExponentialRate(2.0),
            mu=ExponentialRate(2.0),
            nu=ExponentialRate(2.0),
        )
    )
    spectral = sweep_kmin(system, stack, pattern, 6, settings=settings)
    sampled = oracle_kmin(system, stack, pattern, 6, samples=200, seed=3, settings=settings)
    assert 0.0 < sampled <= spectral.k_min * (1 + 1e-12)


def test_kernel_isomorphism(e1: Triple, e1_dichotomy: Triple) -> None:
    result = check_kernel_isomorphism(e1.system, e1.family)
    assert result.passed
    assert result.child("kernel-2").passed
    assert result.child("kernel-3").passed

    reversible = check_kernel_isomorphism(e1_dichotomy.system, e1_dichotomy.family)
    assert reversible.passed
    assert FLAG_REVERSIBLE_SUBCASE in reversible.flags


def test_kernel_isomorphism_detects_collapse(e1: Triple) -> None:
    coeffs = np.array(e1.system.coeffs)
    coeffs[4] = np.diag([0.5, 2.0, 0.0])
    collapsed = make_system(3, coeffs)
    result = check_kernel_isomorphism(collapsed, e1.family)
    assert not result.passed
    assert not result.child("kernel-2").passed
    assert result.child("kernel-2").location == [4, 2]


@pytest.mark.parametrize("name", ["e1-u", "e1-poly", "e1-alternating", "e2-embedded"])
def test_sharp_constant_is_monotone_in_window(name: str, settings: LabSettings) -> None:
    spec = FIXTURES[name]().model_copy(update={"horizon": 40})
    system, family, params = materialize(spec)
    for pattern in trichotomy_patterns(params):
        stack = family.component(pattern.component)
        constants = [
            sweep_kmin(system, stack, pattern, window, settings=settings).k_min
            for window in (10, 20, 40)
        ]
        assert constants == sorted(constants), pattern.name
