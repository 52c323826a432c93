"""Verdict and report models shared by every check."""

from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict

FLAG_HEURISTIC_DIVERGENCE = "heuristic-divergence"
FLAG_PYTHAGORAS_DOWNGRADE = "pythagoras-downgrade"
FLAG_REVERSIBLE_SUBCASE = "reversible-subcase"
FLAG_VACUOUS = "vacuous-bound"


class ReportModel(BaseModel):
    """Base for report models; infinities serialize as strings."""

    model_config = ConfigDict(ser_json_inf_nan="strings")


class CheckResult(ReportModel):
    """Outcome of one structural check (identity, invariance, rank, ...)."""

    name: str
    passed: bool
    worst: float = 0.0
    location: list[int] = []
    message: str = ""
    per_step: list[float] = []
    flags: list[str] = []
    children: list[CheckResult] = []

    @classmethod
    def combine(cls, name: str, children: list[CheckResult]) -> CheckResult:
        """Aggregate child checks; the worst failing child sets the location."""
        failing = [c for c in children if not c.passed]
        worst_child = max(children, key=lambda c: c.worst, default=None)
        culprit = failing[0] if failing else worst_child
        flags = sorted({f for c in children for f in c.flags})
        return cls(
            name=name,
            passed=not failing,
            worst=max((c.worst for c in children), default=0.0),
            location=culprit.location if culprit else [],
            message=(
                f"{culprit.name} failed: {culprit.message}" if failing and culprit else ""
            ),
            flags=flags,
            children=children,
        )

    def child(self, name: str) -> CheckResult:
        """Return the direct child check called `name`."""
        for c in self.children:
            if c.name == name:
                return c
        raise KeyError(name)


class PatternResult(ReportModel):
    """Sharp constant for one envelope inequality over a window."""

    name: str
    direction: str
    component: int
    k_min: float
    log_k_min: float
    witness: tuple[int, int] | None = None
    witness_vector: list[float] = []
    vacuous: bool = False
    passed: bool | None = None


class StageResult(ReportModel):
    """One stage of a staged theorem run."""

    name: str
    passed: bool
    message: str = ""


class VerificationReport(ReportModel):
    """Everything needed to re-verify a headline verdict independently."""

    name: str
    window: int
    passed: bool
    declared_k: float | None = None
    tolerances: dict[str, float] = {}
    patterns: list[PatternResult] = []
    checks: list[CheckResult] = []
    stages: list[StageResult] = []
    flags: list[str] = []
    metrics: dict[str, float] = {}

    @property
    def k_min(self) -> float:
        """Largest sharp constant over all patterns (0 when all are vacuous)."""
        return max((p.k_min for p in self.patterns), default=0.0)

    def pattern(self, name: str) -> PatternResult:
        """Return the pattern result called `name`."""
        for p in self.patterns:
            if p.name == name:
                return p
        raise KeyError(name)

    def check(self, name: str) -> CheckResult:
        """Return the top-level check called `name`."""
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed_stage(self) -> str | None:
        """Name of the first failing stage, if any."""
        return next((s.name for s in self.stages if not s.passed), None)


def relative_error(actual: float, expected: float) -> float:
    """Relative deviation guarded for zero and infinite references."""
    if math.isinf(expected) or math.isinf(actual):
        return 0.0 if actual == expected else math.inf
    return abs(actual - expected) / max(abs(expected), 1e-300)
