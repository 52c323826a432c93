"""The two rescaled systems coupled to a base system, and their scaling identities.

B_n = (h_{n+1}/h_n)^{a/2} (k_{n+1}/k_n)^{b/2} A_n and C_n uses the reciprocal
factor, so B_m^n and C_m^n differ from A_m^n by telescoped scalar factors and
C_m^n = (h_n/h_m)^a (k_n/k_m)^b B_m^n.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from trichotomy_lab.base.errors import DimensionMismatchError, RateError
from trichotomy_lab.base.projections import DiProjectionFamily, TriProjectionFamily, make_S, make_T
from trichotomy_lab.base.rates import RateSequence, make_bar_h, make_tilde_h
from trichotomy_lab.base.report import CheckResult
from trichotomy_lab.base.system import LtvSystem, make_system

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

SCALING_TOL = 1e-10


def _check_exponents(a: float, b: float) -> None:
    if a <= 0 or b < 0:
        raise RateError(f"coupling needs a > 0 and b >= 0, got a={a}, b={b}")


def _log_half_factors(
    horizon: int, h: RateSequence, k: RateSequence, a: float, b: float
) -> FloatArray:
    """log of (h_{n+1}/h_n)^{a/2} (k_{n+1}/k_n)^{b/2} for n = 0..horizon-1."""
    _check_exponents(a, b)
    for name, rate in (("h", h), ("k", k)):
        if rate.horizon is not None and rate.horizon < horizon:
            raise RateError(
                f"rate {name} defined up to step {rate.horizon}, system horizon {horizon}"
            )
    steps = np.arange(horizon + 1)
    log_h = h.log_values(steps)
    log_k = k.log_values(steps)
    return 0.5 * a * np.diff(log_h) + 0.5 * b * np.diff(log_k)


def _rescale(sys: LtvSystem, log_factors: FloatArray) -> LtvSystem:
    return make_system(sys.dim, np.exp(log_factors)[:, None, None] * sys.coeffs)


def build_B(  # noqa: N802
    sys: LtvSystem, h: RateSequence, k: RateSequence, a: float, b: float
) -> LtvSystem:
    """Rescale each A_n by (h_{n+1}/h_n)^{a/2} (k_{n+1}/k_n)^{b/2}."""
    return _rescale(sys, _log_half_factors(sys.horizon, h, k, a, b))


def build_C(  # noqa: N802
    sys: LtvSystem, h: RateSequence, k: RateSequence, a: float, b: float
) -> LtvSystem:
    """Rescale each A_n by (h_n/h_{n+1})^{a/2} (k_n/k_{n+1})^{b/2}."""
    return _rescale(sys, -_log_half_factors(sys.horizon, h, k, a, b))


@dataclass(frozen=True)
class CoupledPair:
    """A base system with both rescaled systems and their splittings."""

    base: LtvSystem
    sys_b: LtvSystem
    sys_c: LtvSystem
    h: RateSequence
    k: RateSequence
    a: float
    b: float
    tilde_h: RateSequence
    bar_h: RateSequence
    S: DiProjectionFamily  # noqa: N815
    T: DiProjectionFamily  # noqa: N815


def couple(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    h: RateSequence,
    k: RateSequence,
    a: float,
    b: float,
) -> CoupledPair:
    """Build both rescaled systems, S, T and the rates carrying their envelopes."""
    tilde_h = make_tilde_h(h, k, a, b)
    pair = CoupledPair(
        base=sys,
        sys_b=build_B(sys, h, k, a, b),
        sys_c=build_C(sys, h, k, a, b),
        h=h,
        k=k,
        a=a,
        b=b,
        tilde_h=tilde_h,
        bar_h=make_bar_h(tilde_h),
        S=make_S(fam),
        T=make_T(fam),
    )
    logger.info("coupled systems built over horizon %d (a=%g, b=%g)", sys.horizon, a, b)
    return pair


def _scaled_agreement(
    name: str,
    lhs: LtvSystem,
    rhs: LtvSystem,
    log_scale: FloatArray,
    window: int,
    tol: float,
) -> CheckResult:
    """Compare lhs_m^n with exp(log_scale[m, n]) rhs_m^n on every pair of the window."""
    if lhs.dim != rhs.dim:
        raise DimensionMismatchError(f"{name}: dimensions {lhs.dim} and {rhs.dim} differ")
    lhs.check_window(window)
    rhs.check_window(window)
    worst = 0.0
    location: list[int] = []
    for n in range(window + 1):
        scale = np.exp(log_scale[n : window + 1, n])[:, None, None]
        expected = scale * rhs.cache.column(n, window)
        diff = np.linalg.norm(lhs.cache.column(n, window) - expected, axis=(1, 2))
        ref = np.linalg.norm(expected, axis=(1, 2))
        rel = diff / np.maximum(ref, np.finfo(np.float64).tiny)
        idx = int(np.argmax(rel))
        if rel[idx] > worst:
            worst = float(rel[idx])
            location = [n + idx, n]
    passed = worst <= tol
    logger.debug("%s on window %d: worst relative deviation %.3e", name, window, worst)
    return CheckResult(
        name=name,
        passed=passed,
        worst=worst,
        location=location,
        message="" if passed else f"relative deviation {worst:.3e} at (m, n) = {location}",
    )


def _log_pair_scale(
    window: int, h: RateSequence, k: RateSequence, ca: float, cb: float
) -> FloatArray:
    """Matrix L[m, n] = ca (log h_m - log h_n) + cb (log k_m - log k_n)."""
    steps = np.arange(window + 1)
    log_h = h.log_values(steps)
    log_k = k.log_values(steps)
    return ca * (log_h[:, None] - log_h[None, :]) + cb * (log_k[:, None] - log_k[None, :])


def check_scaling_B(  # noqa: N802
    sys: LtvSystem,
    sys_b: LtvSystem,
    h: RateSequence,
    k: RateSequence,
    a: float,
    b: float,
    window: int | None = None,
    tol: float = SCALING_TOL,
) -> CheckResult:
    """Check B_m^n = (h_m/h_n)^{a/2} (k_m/k_n)^{b/2} A_m^n on the window."""
    _check_exponents(a, b)
    window = sys.horizon if window is None else window
    scale = _log_pair_scale(window, h, k, 0.5 * a, 0.5 * b)
    return _scaled_agreement("scaling-B", sys_b, sys, scale, window, tol)


def check_scaling_C(  # noqa: N802
    sys: LtvSystem,
    sys_c: LtvSystem,
    h: RateSequence,
    k: RateSequence,
    a: float,
    b: float,
    window: int | None = None,
    tol: float = SCALING_TOL,
) -> CheckResult:
    """Check C_m^n = (h_n/h_m)^{a/2} (k_n/k_m)^{b/2} A_m^n on the window."""
    _check_exponents(a, b)
    window = sys.horizon if window is None else window
    scale = _log_pair_scale(window, h, k, -0.5 * a, -0.5 * b)
    return _scaled_agreement("scaling-C", sys_c, sys, scale, window, tol)


def check_coupling_relation(
    sys_b: LtvSystem,
    sys_c: LtvSystem,
    h: RateSequence,
    k: RateSequence,
    a: float,
    b: float,
    window: int | None = None,
    tol: float = SCALING_TOL,
) -> CheckResult:
    """Check C_m^n = (h_n/h_m)^a (k_n/k_m)^b B_m^n on the window."""
    _check_exponents(a, b)
    window = min(sys_b.horizon, sys_c.horizon) if window is None else window
    scale = _log_pair_scale(window, h, k, -a, -b)
    return _scaled_agreement("coupling-relation", sys_c, sys_b, scale, window, tol)
