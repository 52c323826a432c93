"""Systems, rates, projection families, settings, reports and errors."""

from trichotomy_lab.base.errors import (
    DocumentError,
    PreconditionError,
    TheoremViolationError,
    TrichotomyLabError,
)
from trichotomy_lab.base.projections import (
    DiProjectionFamily,
    ProjectionFamily,
    QuadProjectionFamily,
    TriProjectionFamily,
)
from trichotomy_lab.base.rates import (
    DerivedRate,
    ExponentialRate,
    PolynomialRate,
    RateSequence,
    TabulatedRate,
    rate_from_spec,
)
from trichotomy_lab.base.report import CheckResult, PatternResult, StageResult, VerificationReport
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import LtvSystem, TransitionCache, make_system

__all__ = [
    "CheckResult",
    "DerivedRate",
    "DiProjectionFamily",
    "DocumentError",
    "ExponentialRate",
    "LabSettings",
    "LtvSystem",
    "PatternResult",
    "PolynomialRate",
    "PreconditionError",
    "ProjectionFamily",
    "QuadProjectionFamily",
    "RateSequence",
    "StageResult",
    "TabulatedRate",
    "TheoremViolationError",
    "TransitionCache",
    "TriProjectionFamily",
    "TrichotomyLabError",
    "VerificationReport",
    "get_settings",
    "make_system",
    "rate_from_spec",
]
