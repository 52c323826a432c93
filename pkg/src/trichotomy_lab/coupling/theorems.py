"""Trichotomy/dichotomy equivalences run as checked transformations.

Each forward direction builds a rescaled system and verifies that it is FP
dichotomic; the reverse direction rebuilds the base system and its splitting
from the two rescaled systems and verifies the trichotomy. A conclusion that
fails on inputs satisfying the hypotheses raises `TheoremViolationError`.
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np

from trichotomy_lab.base.errors import (
    CouplingInconsistencyError,
    PreconditionError,
    TheoremViolationError,
    TrichotomyLabError,
)
from trichotomy_lab.base.projections import (
    DiProjectionFamily,
    TriProjectionFamily,
    check_invariance,
    check_range_orthogonality,
    make_S,
    make_T,
    reconstruct_P3,
    validate_tri,
)
from trichotomy_lab.base.rates import RateSequence, make_bar_h, make_tilde_h
from trichotomy_lab.base.report import (
    FLAG_PYTHAGORAS_DOWNGRADE,
    CheckResult,
    PatternResult,
    StageResult,
    VerificationReport,
)
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import LtvSystem
from trichotomy_lab.coupling.systems import (
    build_B,
    build_C,
    check_coupling_relation,
    check_scaling_C,
)
from trichotomy_lab.verify.params import BoundParams, DichotomyParams
from trichotomy_lab.verify.trichotomy import verify_fp_dichotomy, verify_trichotomy

logger = logging.getLogger(__name__)

STAGE_FORWARD_B = "forward-B"
STAGE_FORWARD_C = "forward-C"
STAGE_COUPLING = "coupling relation"
STAGE_REVERSE = "reverse"
STAGE_RECONSTRUCTION = "reconstruction-mismatch"

DICHOTOMY_EXPONENT = 0.5
RECONSTRUCTION_TOL = 1e-12


class ForwardResult(NamedTuple):
    system: LtvSystem
    splitting: DiProjectionFamily
    rate: RateSequence
    report: VerificationReport


class ReverseResult(NamedTuple):
    system: LtvSystem
    family: TriProjectionFamily
    report: VerificationReport


def _forward(
    stage: str,
    sys: LtvSystem,
    fam: TriProjectionFamily,
    params: BoundParams,
    window: int | None,
    settings: LabSettings | None,
) -> ForwardResult:
    settings = settings or get_settings()
    window = sys.horizon if window is None else window
    base = verify_trichotomy(sys, fam, params, window, settings=settings)
    if not base.passed:
        raise PreconditionError(
            f"{stage}: no trichotomy with K={params.K:.12g} on window {window}"
            f" (K_min {base.k_min:.12g})"
        )

    orthogonality = check_range_orthogonality(
        fam, settings.projection_tol, settings.pythagoras_samples, settings.seed
    )
    declared = params.K
    flags = []
    if not orthogonality.passed:
        declared = math.sqrt(2.0) * params.K
        flags.append(FLAG_PYTHAGORAS_DOWNGRADE)
        logger.warning("%s: ranges not orthogonal, expecting constant sqrt(2) K", stage)

    tilde_h = make_tilde_h(params.h, params.k, params.a, params.b)
    if stage == STAGE_FORWARD_B:
        target = build_B(sys, params.h, params.k, params.a, params.b)
        splitting, rate = make_S(fam), tilde_h
    else:
        target = build_C(sys, params.h, params.k, params.a, params.b)
        splitting, rate = make_T(fam), make_bar_h(tilde_h)

    invariance = check_invariance(target, splitting, settings.projection_tol)
    if not invariance.passed:
        raise TheoremViolationError(stage, f"splitting not invariant: {invariance.message}")
    dichotomy = verify_fp_dichotomy(
        target,
        splitting,
        DichotomyParams(
            K=declared,
            eps=params.eps,
            c=DICHOTOMY_EXPONENT,
            h=rate,
            mu=params.mu,
            nu=params.nu,
        ),
        window,
        settings=settings,
    )
    message = f"K_min {dichotomy.k_min:.12g} against K {declared:.12g}"
    if not dichotomy.passed and not flags:
        raise TheoremViolationError(stage, f"FP dichotomy fails: {message}")
    logger.info("%s: %s", stage, message)
    report = dichotomy.model_copy(
        update={
            "name": f"theorem-{stage}",
            "checks": [*dichotomy.checks, orthogonality],
            "stages": [StageResult(name=stage, passed=dichotomy.passed, message=message)],
            "flags": sorted({*dichotomy.flags, *flags}),
            "metrics": {**dichotomy.metrics, "trichotomy_k_min": base.k_min},
        }
    )
    return ForwardResult(target, splitting, rate, report)


def theorem1_forward(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    params: BoundParams,
    window: int | None = None,
    *,
    settings: LabSettings | None = None,
) -> ForwardResult:
    """Build the B-system and confirm it is FP (tilde h, mu, nu)-dichotomic with S.

    Raises:
        PreconditionError: (sys, fam) has no trichotomy with `params`.
        TheoremViolationError: the dichotomy fails on a range-orthogonal family.
    """
    return _forward(STAGE_FORWARD_B, sys, fam, params, window, settings)


def theorem2_forward(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    params: BoundParams,
    window: int | None = None,
    *,
    settings: LabSettings | None = None,
) -> ForwardResult:
    """Build the C-system and confirm it is FP (bar h, mu, nu)-dichotomic with T."""
    return _forward(STAGE_FORWARD_C, sys, fam, params, window, settings)


def theorem3_reverse(
    sys_b: LtvSystem,
    s: DiProjectionFamily,
    sys_c: LtvSystem,
    t: DiProjectionFamily,
    params: BoundParams,
    window: int | None = None,
    *,
    settings: LabSettings | None = None,
) -> ReverseResult:
    """Recover the base system and (S^1, T^2, T^1 S^2) and verify the trichotomy.

    The base system is recovered from `sys_b` and cross-checked against `sys_c`.
    `params.K` is the dichotomy constant of both rescaled systems.

    Raises:
        CouplingInconsistencyError: the two systems do not share a base system.
        IncompatibleSplittingError: S and T are not nested splittings.
        PreconditionError: either rescaled system is not FP dichotomic.
        TheoremViolationError: the recovered trichotomy fails.
    """
    settings = settings or get_settings()
    window = min(sys_b.horizon, sys_c.horizon) if window is None else window
    h, k, a, b = params.h, params.k, params.a, params.b

    relation = check_coupling_relation(sys_b, sys_c, h, k, a, b, window)
    if not relation.passed:
        raise CouplingInconsistencyError(f"{STAGE_COUPLING}: {relation.message}")

    tilde_h = make_tilde_h(h, k, a, b)
    for name, system, splitting, rate in (
        ("B", sys_b, s, tilde_h),
        ("C", sys_c, t, make_bar_h(tilde_h)),
    ):
        dich_params = DichotomyParams(
            K=params.K, eps=params.eps, c=DICHOTOMY_EXPONENT, h=rate, mu=params.mu, nu=params.nu
        )
        dichotomy = verify_fp_dichotomy(system, splitting, dich_params, window, settings=settings)
        if not dichotomy.passed:
            raise PreconditionError(f"{name}-system is not FP dichotomic with K={params.K:.12g}")

    fam = reconstruct_P3(s, t, settings.projection_tol)
    recovered = build_C(sys_b, h, k, a, b)
    cross = check_scaling_C(recovered, sys_c, h, k, a, b, window)
    if not cross.passed:
        raise CouplingInconsistencyError(f"{STAGE_COUPLING}: C-system disagrees with the base")

    trichotomy = verify_trichotomy(recovered, fam, params, window, settings=settings)
    if not trichotomy.passed:
        raise TheoremViolationError(
            STAGE_REVERSE, f"trichotomy fails: K_min {trichotomy.k_min:.12g} > K {params.K:.12g}"
        )
    report = trichotomy.model_copy(
        update={
            "name": "theorem-reverse",
            "checks": [*trichotomy.checks, relation, cross],
            "stages": [
                StageResult(name=STAGE_COUPLING, passed=True),
                StageResult(name=STAGE_REVERSE, passed=True),
            ],
        }
    )
    return ReverseResult(recovered, fam, report)


def _system_error(recovered: LtvSystem, original: LtvSystem) -> float:
    if recovered.coeffs.shape != original.coeffs.shape:
        return math.inf
    diff = np.linalg.norm(recovered.coeffs - original.coeffs, axis=(1, 2))
    ref = np.linalg.norm(original.coeffs, axis=(1, 2))
    return float(np.max(diff / np.maximum(ref, np.finfo(np.float64).tiny)))


def theorem4_equivalence(
    sys: LtvSystem,
    fam: TriProjectionFamily,
    params: BoundParams,
    window: int | None = None,
    *,
    sys_b: LtvSystem | None = None,
    sys_c: LtvSystem | None = None,
    settings: LabSettings | None = None,
) -> VerificationReport:
    """Run both forward directions, then the reverse, and compare with the input.

    `sys_b` and `sys_c` replace the constructed rescaled systems in the
    reverse stage, e.g. when they were read back from documents. Any stage
    failure is recorded in the report and ends the run.

    Raises:
        PreconditionError: `fam` is not a valid splitting.
    """
    settings = settings or get_settings()
    window = sys.horizon if window is None else window
    structure = validate_tri(fam, settings.projection_tol)
    if not structure.passed:
        raise PreconditionError(f"projection family invalid: {structure.message}")

    stages: list[StageResult] = []
    checks: list[CheckResult] = []
    flags: set[str] = set()
    metrics: dict[str, float] = {"eps": params.eps}

    def finish(passed: bool, patterns: list[PatternResult] | None = None) -> VerificationReport:
        logger.info("equivalence round trip on window %d: %s", window, "pass" if passed else "fail")
        return VerificationReport(
            name="equivalence",
            window=window,
            passed=passed,
            declared_k=params.K,
            tolerances={
                "verdict": settings.verdict_tol,
                "projection": settings.projection_tol,
                "reconstruction": RECONSTRUCTION_TOL,
            },
            patterns=patterns or [],
            checks=checks,
            stages=stages,
            flags=sorted(flags),
            metrics=metrics,
        )

    def failed(stage: str, error: TrichotomyLabError) -> VerificationReport:
        stage = getattr(error, "stage", stage)
        if isinstance(error, CouplingInconsistencyError):
            stage = STAGE_COUPLING
        logger.warning("stage %s failed: %s", stage, error)
        stages.append(StageResult(name=stage, passed=False, message=str(error)))
        return finish(False)

    forward = {}
    for stage, run in ((STAGE_FORWARD_B, theorem1_forward), (STAGE_FORWARD_C, theorem2_forward)):
        try:
            result = run(sys, fam, params, window, settings=settings)
        except (PreconditionError, TheoremViolationError) as e:
            return failed(stage, e)
        forward[stage] = result
        stages.extend(result.report.stages)
        flags.update(result.report.flags)
        metrics[f"{stage}_k_min"] = result.report.k_min
        if not result.report.passed:
            return finish(False)

    fwd_b, fwd_c = forward[STAGE_FORWARD_B], forward[STAGE_FORWARD_C]
    dichotomy_k = max(fwd_b.report.declared_k or params.K, fwd_c.report.declared_k or params.K)
    try:
        reverse = theorem3_reverse(
            sys_b if sys_b is not None else fwd_b.system,
            fwd_b.splitting,
            sys_c if sys_c is not None else fwd_c.system,
            fwd_c.splitting,
            params.model_copy(update={"K": dichotomy_k}),
            window,
            settings=settings,
        )
    except (PreconditionError, TheoremViolationError) as e:
        return failed(STAGE_REVERSE, e)
    stages.extend(reverse.report.stages)
    checks.extend(reverse.report.checks)
    flags.update(reverse.report.flags)

    family_error = reverse.family.max_deviation(fam)
    system_error = _system_error(reverse.system, sys)
    k_min = reverse.report.k_min
    metrics.update({"family_error": family_error, "system_error": system_error, "k_min": k_min})
    problems = []
    if family_error > RECONSTRUCTION_TOL:
        problems.append(f"family differs by {family_error:.3e}")
    if system_error > RECONSTRUCTION_TOL:
        problems.append(f"system differs by {system_error:.3e} relative")
    if k_min > params.K * (1 + settings.verdict_tol):
        problems.append(f"K_min {k_min:.12g} exceeds K {params.K:.12g}")
    stages.append(
        StageResult(name=STAGE_RECONSTRUCTION, passed=not problems, message="; ".join(problems))
    )
    return finish(not problems, reverse.report.patterns)
