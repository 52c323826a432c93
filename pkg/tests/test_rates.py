from __future__ import annotations

import math

import numpy as np
import pytest

from trichotomy_lab.base.errors import RateError
from trichotomy_lab.base.rates import (
    ExponentialRate,
    PolynomialRate,
    TabulatedRate,
    make_bar_h,
    make_tilde_h,
    rate_from_spec,
    require_growth_rate,
    validate_growth_rate,
)
from trichotomy_lab.base.report import FLAG_HEURISTIC_DIVERGENCE


def test_exponential_rate_in_log_space() -> None:
    h = ExponentialRate(2.0)
    np.testing.assert_allclose(h.values([0, 1, 10]), [1.0, 2.0, 1024.0])
    assert h.log_value(5000) == pytest.approx(5000 * math.log(2.0))
    assert float(h.log_ratio(3, 1)) == pytest.approx(2 * math.log(2.0))


def test_polynomial_rate() -> None:
    mu = PolynomialRate(1.0)
    np.testing.assert_allclose(mu.values([0, 1, 9]), [1.0, 2.0, 10.0])


@pytest.mark.parametrize(
    ("spec", "expected"),
    [
        ({"kind": "exp", "lambda": 3.0}, [1.0, 3.0, 9.0]),
        ({"kind": "poly", "p": 2.0}, [1.0, 4.0, 9.0]),
        ({"kind": "table", "values": [1.0, 1.5, 4.0]}, [1.0, 1.5, 4.0]),
    ],
)
def test_rate_from_spec(spec: dict[str, object], expected: list[float]) -> None:
    np.testing.assert_allclose(rate_from_spec(spec).values([0, 1, 2]), expected)


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "exp", "lambda": 1.0},
        {"kind": "poly", "p": 0.0},
        {"kind": "table", "values": [1.0, -2.0]},
        {"kind": "exp"},
        {"kind": "spline"},
    ],
)
def test_rate_from_spec_rejects(spec: dict[str, object]) -> None:
    with pytest.raises(RateError):
        rate_from_spec(spec)


def test_tabulated_rate_is_bounded() -> None:
    table = TabulatedRate.constant(1.0, 4)
    assert table.horizon == 4
    with pytest.raises(RateError):
        table.values([5])
    with pytest.raises(RateError):
        ExponentialRate(2.0).values([-1])


def test_growth_rate_validation() -> None:
    result = validate_growth_rate(ExponentialRate(2.0), 10)
    assert result.passed
    assert FLAG_HEURISTIC_DIVERGENCE in result.flags

    slow = validate_growth_rate(PolynomialRate(1.0), 5, floor=10.0)
    assert not slow.passed
    assert slow.location == [5]

    shifted = validate_growth_rate(TabulatedRate.from_values([2.0, 3.0, 20.0]), 2)
    assert not shifted.passed
    assert shifted.location == [0]

    dropping = validate_growth_rate(TabulatedRate.from_values([1.0, 3.0, 2.0, 30.0]), 3)
    assert not dropping.passed
    assert dropping.location == [2]

    with pytest.raises(RateError):
        validate_growth_rate(ExponentialRate(2.0), 1)
    with pytest.raises(RateError):
        require_growth_rate(TabulatedRate.constant(1.0, 10), 10)


def test_tilde_and_bar_h() -> None:
    h, k = ExponentialRate(2.0), ExponentialRate(2.0)
    tilde_h = make_tilde_h(h, k, 1.0, 1.0)
    np.testing.assert_allclose(tilde_h.values(np.arange(50)), 1.0)

    tilde_h = make_tilde_h(ExponentialRate(3.0), k, 2.0, 1.0)
    bar_h = make_bar_h(tilde_h)
    steps = np.arange(20)
    np.testing.assert_allclose(tilde_h.log_values(steps), steps * (2 * math.log(3) - math.log(2)))
    np.testing.assert_allclose(bar_h.log_values(steps), -tilde_h.log_values(steps))

    with pytest.raises(RateError):
        make_tilde_h(h, k, 0.0, 1.0)


def test_derived_rate_serializes_as_table() -> None:
    tilde_h = make_tilde_h(ExponentialRate(2.0), ExponentialRate(2.0), 1.0, 1.0)
    spec = tilde_h.to_spec(3)
    assert spec == {"kind": "table", "values": [1.0, 1.0, 1.0, 1.0]}


def test_tabulated_rate_round_trips_exactly() -> None:
    values = [1.0, 3.0, 7.3, 12.345]
    rate = rate_from_spec({"kind": "table", "values": values})
    assert rate.to_spec(3) == {"kind": "table", "values": values}
    assert rate_from_spec(rate.to_spec(3)).to_spec(3)["values"] == values
    assert rate.to_spec(1)["values"] == [1.0, 3.0]
