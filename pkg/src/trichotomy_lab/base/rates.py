"""Positive rate sequences n -> r_n, stored and combined in log space."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from enum import StrEnum
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt

from trichotomy_lab.base.errors import RateError
from trichotomy_lab.base.report import FLAG_HEURISTIC_DIVERGENCE, CheckResult

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class RateKind(StrEnum):
    EXPONENTIAL = "exp"
    POLYNOMIAL = "poly"
    TABULATED = "table"


def _as_steps(steps: npt.ArrayLike) -> npt.NDArray[np.int64]:
    arr = np.asarray(steps, dtype=np.int64)
    if arr.size and arr.min() < 0:
        raise RateError("rates are defined on nonnegative steps only")
    return arr


class RateSequence(ABC):
    """A sequence of positive reals r_n, evaluated through log r_n."""

    kind: ClassVar[RateKind]

    @property
    def horizon(self) -> int | None:
        """Last step the sequence is defined on, or None when unbounded."""
        return None

    @abstractmethod
    def _log_values(self, steps: npt.NDArray[np.int64]) -> FloatArray: ...

    @abstractmethod
    def to_spec(self, horizon: int) -> dict[str, Any]:
        """Serialize to the rate grammar, tabulating over 0..horizon if needed."""

    def log_values(self, steps: npt.ArrayLike) -> FloatArray:
        """Return log r_n for every n in `steps`."""
        arr = _as_steps(steps)
        self.require_defined(int(arr.max()) if arr.size else 0)
        return self._log_values(arr)

    def log_value(self, n: int) -> float:
        return float(self.log_values(np.array([n]))[0])

    def values(self, steps: npt.ArrayLike) -> FloatArray:
        """Return r_n directly; may overflow where log_values does not."""
        return np.exp(self.log_values(steps))

    def value(self, n: int) -> float:
        return float(self.values(np.array([n]))[0])

    def log_ratio(self, m: npt.ArrayLike, n: npt.ArrayLike) -> FloatArray:
        """Return log(r_m / r_n) elementwise."""
        return self.log_values(m) - self.log_values(n)

    def require_defined(self, up_to: int) -> None:
        """Raise `RateError` unless the sequence is defined on 0..up_to."""
        if self.horizon is not None and up_to > self.horizon:
            raise RateError(f"rate defined up to step {self.horizon}, step {up_to} requested")


class ExponentialRate(RateSequence):
    """r_n = base**n with base > 1."""

    kind = RateKind.EXPONENTIAL

    def __init__(self, base: float) -> None:
        if not math.isfinite(base) or base <= 1:
            raise RateError(f"exponential rate needs base > 1, got {base}")
        self.base = float(base)
        self.log_base = math.log(self.base)

    def __repr__(self) -> str:
        return f"ExponentialRate(base={self.base!r})"

    def _log_values(self, steps: npt.NDArray[np.int64]) -> FloatArray:
        return steps.astype(np.float64) * self.log_base

    def to_spec(self, horizon: int) -> dict[str, Any]:
        return {"kind": "exp", "lambda": self.base}


class PolynomialRate(RateSequence):
    """r_n = (n + 1)**degree with degree > 0."""

    kind = RateKind.POLYNOMIAL

    def __init__(self, degree: float) -> None:
        if not math.isfinite(degree) or degree <= 0:
            raise RateError(f"polynomial rate needs degree > 0, got {degree}")
        self.degree = float(degree)

    def __repr__(self) -> str:
        return f"PolynomialRate(degree={self.degree!r})"

    def _log_values(self, steps: npt.NDArray[np.int64]) -> FloatArray:
        return self.degree * np.log(steps.astype(np.float64) + 1.0)

    def to_spec(self, horizon: int) -> dict[str, Any]:
        return {"kind": "poly", "p": self.degree}


class TabulatedRate(RateSequence):
    """Finite table of positive values r_0..r_T, kept as logs.

    Values read through `from_values` are kept as given and written back
    unchanged by `to_spec`.
    """

    kind = RateKind.TABULATED

    def __init__(
        self, log_table: npt.ArrayLike, values: npt.ArrayLike | None = None
    ) -> None:
        table = np.array(log_table, dtype=np.float64)
        if table.ndim != 1 or table.size == 0:
            raise RateError("a tabulated rate needs a nonempty 1-d table")
        if not np.all(np.isfinite(table)):
            raise RateError("tabulated rate values must be positive and finite")
        table.setflags(write=False)
        self.log_table = table
        self._values: FloatArray | None = None
        if values is not None:
            raw = np.array(values, dtype=np.float64)
            if raw.shape != table.shape:
                raise RateError(f"{raw.size} values for a table of {table.size} logs")
            raw.setflags(write=False)
            self._values = raw

    @classmethod
    def from_values(cls, values: npt.ArrayLike) -> TabulatedRate:
        arr = np.asarray(values, dtype=np.float64)
        if arr.size and (np.any(arr <= 0) or not np.all(np.isfinite(arr))):
            raise RateError("tabulated rate values must be positive and finite")
        return cls(np.log(arr), arr)

    @classmethod
    def constant(cls, value: float, horizon: int) -> TabulatedRate:
        return cls.from_values(np.full(horizon + 1, value))

    def __repr__(self) -> str:
        return f"TabulatedRate(horizon={self.horizon})"

    @property
    def horizon(self) -> int:
        return int(self.log_table.size - 1)

    def _log_values(self, steps: npt.NDArray[np.int64]) -> FloatArray:
        return self.log_table[steps]

    def to_spec(self, horizon: int) -> dict[str, Any]:
        source = np.exp(self.log_table) if self._values is None else self._values
        return {"kind": "table", "values": source[: horizon + 1].tolist()}


class DerivedRate(RateSequence):
    """Product of powers of other rates: log r_n = sum c_i log r^i_n."""

    kind = RateKind.TABULATED

    def __init__(self, terms: tuple[tuple[float, RateSequence], ...]) -> None:
        if not terms:
            raise RateError("a derived rate needs at least one term")
        self.terms = terms

    def __repr__(self) -> str:
        return f"DerivedRate(terms={self.terms!r})"

    @property
    def horizon(self) -> int | None:
        bounded = [r.horizon for _, r in self.terms if r.horizon is not None]
        return min(bounded) if bounded else None

    def _log_values(self, steps: npt.NDArray[np.int64]) -> FloatArray:
        total = np.zeros(steps.shape, dtype=np.float64)
        for coef, rate in self.terms:
            total = total + coef * rate.log_values(steps)
        return total

    def to_spec(self, horizon: int) -> dict[str, Any]:
        return {"kind": "table", "values": self.values(np.arange(horizon + 1)).tolist()}


def validate_growth_rate(r: RateSequence, window: int, floor: float = 10.0) -> CheckResult:
    """Check the growth-rate axioms of `r` on 0..window.

    r(0) must equal 1 exactly and r must be nondecreasing. Divergence to
    infinity is replaced by the heuristic r(window) >= floor, so the result
    always carries the heuristic-divergence flag.
    """
    if window < 2:
        raise RateError(f"growth-rate validation needs window >= 2, got {window}")
    if floor <= 0:
        raise RateError(f"divergence floor must be positive, got {floor}")
    logs = r.log_values(np.arange(window + 1))
    flags = [FLAG_HEURISTIC_DIVERGENCE]

    def verdict(passed: bool, location: list[int], message: str, worst: float = 0.0) -> CheckResult:
        return CheckResult(
            name="growth-rate",
            passed=passed,
            worst=worst,
            location=location,
            message=message,
            flags=flags,
        )

    if logs[0] != 0.0:
        return verdict(False, [0], f"r(0) = {math.exp(logs[0])!r}, expected exactly 1")
    drops = np.flatnonzero(np.diff(logs) < 0)
    if drops.size:
        n = int(drops[0]) + 1
        return verdict(False, [n], f"decreasing at step {n}", float(logs[n - 1] - logs[n]))
    if logs[window] < math.log(floor):
        return verdict(
            False,
            [window],
            f"r({window}) = {math.exp(logs[window]):.6g} below divergence floor {floor:g}"
            f" (heuristic, window {window})",
        )
    return verdict(True, [], f"growth rate on window {window} with floor {floor:g} (heuristic)")


def require_growth_rate(r: RateSequence, window: int, floor: float = 10.0) -> RateSequence:
    """Return `r` unchanged if it passes `validate_growth_rate`, else raise."""
    result = validate_growth_rate(r, window, floor)
    if not result.passed:
        raise RateError(f"not a growth rate: {result.message}")
    return r


def make_tilde_h(h: RateSequence, k: RateSequence, a: float, b: float) -> RateSequence:
    """Return the rate h_n**a / k_n**b."""
    if a <= 0 or b < 0:
        raise RateError(f"need a > 0 and b >= 0, got a={a}, b={b}")
    return DerivedRate(((float(a), h), (-float(b), k)))


def make_bar_h(th: RateSequence) -> RateSequence:
    """Return the pointwise reciprocal 1 / th_n by negating log-values."""
    if isinstance(th, DerivedRate):
        return DerivedRate(tuple((-coef, rate) for coef, rate in th.terms))
    if isinstance(th, TabulatedRate):
        return TabulatedRate(-th.log_table)
    return DerivedRate(((-1.0, th),))


def rate_from_spec(spec: dict[str, Any]) -> RateSequence:
    """Build a rate from the grammar {"kind": "exp"|"poly"|"table", ...}."""
    kind = spec.get("kind")
    try:
        if kind == RateKind.EXPONENTIAL:
            return ExponentialRate(float(spec["lambda"]))
        if kind == RateKind.POLYNOMIAL:
            return PolynomialRate(float(spec["p"]))
        if kind == RateKind.TABULATED:
            return TabulatedRate.from_values(spec["values"])
    except KeyError as e:
        raise RateError(f"rate spec of kind {kind!r} is missing {e}") from e
    raise RateError(f"unknown rate kind {kind!r}")
