"""Trichotomy and FP-dichotomy verdicts over a finite window."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from trichotomy_lab.base.errors import FamilyError, PreconditionError
from trichotomy_lab.base.projections import (
    DiProjectionFamily,
    ProjectionFamily,
    TriProjectionFamily,
    check_invariance,
    validate_tri,
)
from trichotomy_lab.base.rates import RateSequence, validate_growth_rate
from trichotomy_lab.base.report import (
    FLAG_VACUOUS,
    CheckResult,
    PatternResult,
    VerificationReport,
)
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import LtvSystem
from trichotomy_lab.verify.params import BoundParams, DichotomyParams
from trichotomy_lab.verify.spectral import (
    Direction,
    Envelope,
    InequalityPattern,
    check_kernel_isomorphism,
    sweep_kmin,
)

logger = logging.getLogger(__name__)

STABLE_FORWARD = "stable-forward"
UNSTABLE_BACKWARD = "unstable-backward"
CENTRAL_FORWARD = "central-forward"
CENTRAL_BACKWARD = "central-backward"
FIRST_FORWARD = "first-forward"
SECOND_BACKWARD = "second-backward"

# Minimizers of estimate_exponents are grid points within this relative slack of the best.
TIE_SLACK = 1e-9


def trichotomy_patterns(params: BoundParams) -> list[InequalityPattern]:
    """The four inequalities of an (h, k, mu, nu)-trichotomy.

    stable-forward:    ||A_m^n P^1_n x|| <= K (h_n/h_m)^a mu_n^eps ||P^1_n x||
    unstable-backward: ||P^2_n x|| <= K (k_n/k_m)^b nu_m^eps ||A_m^n P^2_n x||
    central-forward:   ||A_m^n P^3_n x|| <= K (h_m/h_n)^a mu_n^eps ||P^3_n x||
    central-backward:  ||P^3_n x|| <= K (k_m/k_n)^b nu_m^eps ||A_m^n P^3_n x||
    """
    h, k, mu, nu = params.h, params.k, params.mu, params.nu
    a, b, eps = params.a, params.b, params.eps
    forward, backward = Direction.FORWARD_UPPER, Direction.BACKWARD_LOWER
    return [
        InequalityPattern(STABLE_FORWARD, forward, 1, Envelope(h, a, mu, eps, "n")),
        InequalityPattern(UNSTABLE_BACKWARD, backward, 2, Envelope(k, b, nu, eps, "m")),
        InequalityPattern(CENTRAL_FORWARD, forward, 3, Envelope(h, -a, mu, eps, "n")),
        InequalityPattern(CENTRAL_BACKWARD, backward, 3, Envelope(k, -b, nu, eps, "m")),
    ]


def dichotomy_patterns(params: DichotomyParams) -> list[InequalityPattern]:
    """Forward bound on the first projection and backward bound on the second.

    Both envelopes are (h_n/h_m)^c, weighted by mu_n^eps and nu_m^eps respectively.
    """
    first = Envelope(params.h, params.c, params.mu, params.eps, "n")
    second = Envelope(params.h, params.c, params.nu, params.eps, "m")
    return [
        InequalityPattern(FIRST_FORWARD, Direction.FORWARD_UPPER, 1, first),
        InequalityPattern(SECOND_BACKWARD, Direction.BACKWARD_LOWER, 2, second),
    ]


def _resolve_window(sys: LtvSystem, fam: ProjectionFamily, window: int | None) -> int:
    window = sys.horizon if window is None else window
    sys.check_window(window)
    if fam.dim != sys.dim:
        raise FamilyError(f"family dimension {fam.dim} != system dimension {sys.dim}")
    if fam.horizon < window:
        raise FamilyError(f"family horizon {fam.horizon} shorter than window {window}")
    return window


def _require(check: CheckResult, what: str) -> CheckResult:
    if not check.passed:
        raise PreconditionError(f"{what}: {check.message}")
    return check


def _sweep_patterns(
    sys: LtvSystem,
    fam: ProjectionFamily,
    patterns: list[InequalityPattern],
    window: int,
    bound: float,
    settings: LabSettings,
) -> list[PatternResult]:
    results = []
    for pattern in patterns:
        stack = fam.component(pattern.component)
        result = sweep_kmin(sys, stack, pattern, window, check=False, settings=settings)
        passed = result.k_min <= bound
        results.append(result.model_copy(update={"passed": passed}))
        if not passed:
            logger.info("%s exceeds the bound: %.6g > %.6g", pattern.name, result.k_min, bound)
    return results


def _assemble(
    name: str,
    window: int,
    declared_k: float,
    tol: float,
    settings: LabSettings,
    patterns: list[PatternResult],
    checks: list[CheckResult],
    gating: list[CheckResult],
) -> VerificationReport:
    flags = {f for c in checks for f in c.flags}
    if any(p.vacuous for p in patterns):
        flags.add(FLAG_VACUOUS)
    passed = all(p.passed for p in patterns) and all(c.passed for c in gating)
    k_min = max((p.k_min for p in patterns), default=0.0)
    verdict = "pass" if passed else "fail"
    logger.info("%s on window %d: %s (K_min %.12g)", name, window, verdict, k_min)
    return VerificationReport(
        name=name,
        window=window,
        passed=passed,
        declared_k=declared_k,
        tolerances={
            "verdict": tol,
            "projection": settings.projection_tol,
            "rank": settings.rank_tol,
        },
        patterns=patterns,
        checks=checks,
        flags=sorted(flags),
        metrics={"k_min": k_min},
    )


def verify_trichotomy(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    params: BoundParams,
    window: int | None = None,
    *,
    tol: float | None = None,
    fp: bool = False,
    settings: LabSettings | None = None,
) -> VerificationReport:
    """Decide whether (sys, fam) admits an (h, k, mu, nu)-trichotomy with `params` on a window.

    The verdict passes when every sharp constant is at most K (1 + tol) and
    the kernels of P^2 and P^3 are carried isomorphically. Growth-rate checks
    on h, k, mu and nu are reported but never gate the verdict; they are
    skipped entirely for the FP variant.

    Args:
        sys: The base system.
        fam: Stable, unstable and central projections.
        params: Declared constants and rates.
        window: Last step considered, defaults to the system horizon.
        tol: Relative slack on K, defaults to the settings' verdict tolerance.
        fp: Treat the rates as plain positive sequences.
        settings: Tolerances and parallelism.

    Raises:
        PreconditionError: The family is not a valid invariant splitting.
    """
    settings = settings or get_settings()
    tol = settings.verdict_tol if tol is None else tol
    window = _resolve_window(sys, fam, window)
    structure = _require(validate_tri(fam, settings.projection_tol), "projection family invalid")
    invariance = _require(
        check_invariance(sys, fam, settings.projection_tol), "projection family not invariant"
    )

    bound = params.K * (1 + tol)
    patterns = _sweep_patterns(sys, fam, trichotomy_patterns(params), window, bound, settings)
    kernel = check_kernel_isomorphism(sys, fam, (2, 3), window, settings.rank_tol)
    checks = [structure, invariance, kernel]
    if not fp:
        checks.extend(growth_checks(params.rates(), window, settings.divergence_floor))
    return _assemble(
        "fp-trichotomy" if fp else "trichotomy",
        window,
        params.K,
        tol,
        settings,
        patterns,
        checks,
        gating=[kernel],
    )


def growth_checks(rates: dict[str, RateSequence], window: int, floor: float) -> list[CheckResult]:
    if window < 2:
        logger.warning("window %d too short for growth-rate checks, skipped", window)
        return []
    checks = []
    for role, rate in rates.items():
        check = validate_growth_rate(rate, window, floor)
        if not check.passed:
            logger.warning("rate %s is not a growth rate: %s", role, check.message)
        checks.append(check.model_copy(update={"name": f"growth-rate-{role}"}))
    return checks


def verify_fp_dichotomy(
    sys: LtvSystem,
    di: DiProjectionFamily,
    params: DichotomyParams,
    window: int | None = None,
    *,
    tol: float | None = None,
    settings: LabSettings | None = None,
) -> VerificationReport:
    """Decide whether (sys, di) is FP (h, mu, nu)-dichotomic with exponent c on a window.

    Raises:
        PreconditionError: `di` is not a valid invariant pair.
    """
    settings = settings or get_settings()
    tol = settings.verdict_tol if tol is None else tol
    window = _resolve_window(sys, di, window)
    structure = _require(di.validate(settings.projection_tol), "projection pair invalid")
    invariance = _require(
        check_invariance(sys, di, settings.projection_tol), "projection pair not invariant"
    )
    bound = params.K * (1 + tol)
    patterns = _sweep_patterns(sys, di, dichotomy_patterns(params), window, bound, settings)
    kernel = check_kernel_isomorphism(sys, di, (2,), window, settings.rank_tol)
    return _assemble(
        "fp-dichotomy",
        window,
        params.K,
        tol,
        settings,
        patterns,
        [structure, invariance, kernel],
        gating=[kernel],
    )


class ExponentGrid(BaseModel):
    """Candidate values for a (> 0), b (>= 0) and eps (>= 0)."""

    model_config = ConfigDict(frozen=True)

    a: list[float] = Field(min_length=1)
    b: list[float] = Field(default=[0.0], min_length=1)
    eps: list[float] = Field(default=[0.0], min_length=1)

    @field_validator("a")
    @classmethod
    def _positive(cls, values: list[float]) -> list[float]:
        if min(values) <= 0:
            raise ValueError(f"a candidates must be positive, got {values}")
        return values

    @field_validator("b", "eps")
    @classmethod
    def _nonnegative(cls, values: list[float]) -> list[float]:
        if min(values) < 0:
            raise ValueError(f"candidates must be nonnegative, got {values}")
        return values

    def points(self) -> list[tuple[float, float, float]]:
        return [(a, b, eps) for a in self.a for b in self.b for eps in self.eps]


@dataclass(frozen=True)
class ExponentEstimate:
    params: BoundParams
    k_min: float
    table: pd.DataFrame


def estimate_exponents(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    h: RateSequence,
    k: RateSequence,
    mu: RateSequence,
    nu: RateSequence,
    grid: ExponentGrid,
    window: int | None = None,
    *,
    settings: LabSettings | None = None,
) -> ExponentEstimate:
    """Grid search for the exponents with the smallest overall K_min.

    Minimizers are the points within a relative 1e-9 of the best K_min. Among
    them the smallest eps wins, then the largest a (sharper exponent), then the
    largest b. The returned params carry K = K_min when it is finite and
    positive, else K = 1.
    """
    settings = settings or get_settings()
    window = _resolve_window(sys, fam, window)
    _require(validate_tri(fam, settings.projection_tol), "projection family invalid")
    _require(check_invariance(sys, fam, settings.projection_tol), "projection family not invariant")

    rows = []
    for a, b, eps in grid.points():
        params = BoundParams(K=1.0, a=a, b=b, eps=eps, h=h, k=k, mu=mu, nu=nu)
        results = [
            sweep_kmin(sys, fam.component(p.component), p, window, check=False, settings=settings)
            for p in trichotomy_patterns(params)
        ]
        log_k = max(r.log_k_min for r in results)
        logger.debug("grid point a=%g b=%g eps=%g: log K_min %.6g", a, b, eps, log_k)
        k_min = max(r.k_min for r in results)
        rows.append({"a": a, "b": b, "eps": eps, "log_k_min": log_k, "k_min": k_min})

    table = pd.DataFrame(rows)
    best = table["log_k_min"].min()
    if math.isfinite(best):
        minimizers = table[table["log_k_min"] <= best + math.log1p(TIE_SLACK)]
    else:
        minimizers = table[table["log_k_min"] == best]
    ordered = minimizers.sort_values(
        ["eps", "a", "b"], ascending=[True, False, False], kind="stable"
    )
    chosen = ordered.iloc[0]
    k_min = float(chosen["k_min"])
    declared = k_min if np.isfinite(k_min) and k_min > 0 else 1.0
    logger.info("selected %s, K_min %.12g", chosen[["a", "b", "eps"]].to_dict(), k_min)
    params = BoundParams(
        K=declared,
        a=float(chosen["a"]),
        b=float(chosen["b"]),
        eps=float(chosen["eps"]),
        h=h,
        k=k,
        mu=mu,
        nu=nu,
    )
    return ExponentEstimate(params=params, k_min=k_min, table=table)
