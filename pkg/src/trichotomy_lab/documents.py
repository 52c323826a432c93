"""JSON documents: system inputs, derived system outputs and reports."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from trichotomy_lab import __version__
from trichotomy_lab.base.errors import DocumentError, TrichotomyLabError
from trichotomy_lab.base.projections import (
    DiProjectionFamily,
    ProjectionFamily,
    TriProjectionFamily,
)
from trichotomy_lab.base.rates import RateSequence, rate_from_spec
from trichotomy_lab.base.report import CheckResult, ReportModel, VerificationReport
from trichotomy_lab.base.system import LtvSystem, make_system
from trichotomy_lab.genlab.fixtures import materialize
from trichotomy_lab.genlab.generators import GeneratorSpec
from trichotomy_lab.verify.params import BoundParams, DichotomyParams

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
RATE_ROLES = ("h", "k", "mu", "nu")

Matrix = list[list[float]]


class ParamsSpec(BaseModel):
    """Declared constants; omitted fields fall back to a generator's certificate."""

    K: float | None = Field(default=None, gt=0)
    a: float | None = Field(default=None, gt=0)
    b: float | None = Field(default=None, ge=0)
    eps: float | None = Field(default=None, ge=0)
    c: float | None = Field(default=None, gt=0)


class ProjectionsSpec(BaseModel):
    """Per-step projections, steps outermost, matrices row-major."""

    P1: list[Matrix]
    P2: list[Matrix]
    P3: list[Matrix] | None = None


class SystemDocument(BaseModel):
    """Input document describing a system, its splitting, rates and constants."""

    version: str
    mode: Literal["trichotomy", "dichotomy"] = "trichotomy"
    dim: int | None = Field(default=None, ge=1)
    horizon: int | None = Field(default=None, ge=1)
    coeffs: list[Matrix] | None = None
    generate: GeneratorSpec | None = None
    rates: dict[str, dict[str, Any]] = {}
    params: ParamsSpec | None = None
    projections: ProjectionsSpec | None = None

    @model_validator(mode="after")
    def _check_layout(self) -> SystemDocument:
        if self.version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema version {self.version!r}, expected {SCHEMA_VERSION!r}"
            )
        if (self.coeffs is None) == (self.generate is None):
            raise ValueError("exactly one of 'coeffs' and 'generate' is required")
        unknown = set(self.rates) - set(RATE_ROLES)
        if unknown:
            raise ValueError(f"unknown rate roles {sorted(unknown)}")
        if self.coeffs is not None:
            if self.dim is None or self.horizon is None:
                raise ValueError("'dim' and 'horizon' are required with 'coeffs'")
            _check_stack("coeffs", self.coeffs, self.horizon, self.dim)
        if self.projections is not None and self.dim is not None and self.horizon is not None:
            for name in ("P1", "P2", "P3"):
                stack = getattr(self.projections, name)
                if stack is not None:
                    _check_stack(f"projections.{name}", stack, self.horizon + 1, self.dim)
        return self


def _check_stack(name: str, stack: list[Matrix], steps: int, dim: int) -> None:
    if len(stack) != steps:
        raise ValueError(f"{name} has {len(stack)} steps, expected {steps}")
    for n, mat in enumerate(stack):
        if len(mat) != dim or any(len(row) != dim for row in mat):
            raise ValueError(f"{name}[{n}] is not {dim} x {dim}")


@dataclass(frozen=True)
class Problem:
    """A document resolved into numerical objects."""

    mode: str
    system: LtvSystem
    family: ProjectionFamily | None
    rates: dict[str, RateSequence]
    params: ParamsSpec

    def require_family(self) -> ProjectionFamily:
        if self.family is None:
            raise DocumentError("projections required", "projections")
        return self.family

    def require_tri(self) -> TriProjectionFamily:
        family = self.require_family()
        if not isinstance(family, TriProjectionFamily):
            raise DocumentError("trichotomy projections P1, P2, P3 required", "projections")
        return family

    def require_di(self) -> DiProjectionFamily:
        family = self.require_family()
        if not isinstance(family, DiProjectionFamily):
            raise DocumentError("dichotomy projections P1, P2 required", "projections")
        return family

    def rate(self, role: str) -> RateSequence:
        if role not in self.rates:
            raise DocumentError(f"rate {role!r} required", f"rates.{role}")
        return self.rates[role]

    def _value(self, name: str, default: float | None = None) -> float:
        value = getattr(self.params, name)
        if value is None:
            if default is None:
                raise DocumentError(f"parameter {name!r} required", f"params.{name}")
            return default
        return float(value)

    def bound_params(self) -> BoundParams:
        return BoundParams(
            K=self._value("K"),
            a=self._value("a"),
            b=self._value("b"),
            eps=self._value("eps", 0.0),
            **{role: self.rate(role) for role in RATE_ROLES},
        )

    def dichotomy_params(self) -> DichotomyParams:
        return DichotomyParams(
            K=self._value("K"),
            eps=self._value("eps", 0.0),
            c=self._value("c", 0.5),
            h=self.rate("h"),
            mu=self.rate("mu"),
            nu=self.rate("nu"),
        )


def read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise DocumentError(f"cannot read {path}: {e.strerror}", str(path)) from e


def input_digest(*raws: bytes) -> str:
    """SHA-256 over the given input documents, in order."""
    digest = hashlib.sha256()
    for raw in raws:
        digest.update(raw)
    return digest.hexdigest()


def parse_document(raw: bytes, source: str = "<input>") -> SystemDocument:
    """Parse and validate a system document.

    Raises:
        DocumentError: malformed JSON or schema violations, with the offending location.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise DocumentError(e.msg, f"{source}:{e.lineno}:{e.colno}") from e
    try:
        return SystemDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or source
        raise DocumentError(first["msg"], location) from e


def load_document(path: Path) -> SystemDocument:
    return parse_document(read_bytes(path), str(path))


def resolve(doc: SystemDocument) -> Problem:
    """Turn a validated document into a system, family, rates and parameters.

    A `generate` block supplies all four; explicit rates and parameters in the
    document override the generator's certificate field by field.
    """
    try:
        return _resolve(doc)
    except DocumentError:
        raise
    except TrichotomyLabError as e:
        raise DocumentError(str(e), "document") from e


def _resolve(doc: SystemDocument) -> Problem:
    rates: dict[str, RateSequence] = {}
    params = ParamsSpec()
    family: ProjectionFamily | None = None
    if doc.generate is not None:
        system, family, certificate = materialize(doc.generate)
        rates = certificate.rates()
        params = ParamsSpec(K=certificate.K, a=certificate.a, b=certificate.b, eps=certificate.eps)
        for name, value in (("dim", system.dim), ("horizon", system.horizon)):
            declared = getattr(doc, name)
            if declared is not None and declared != value:
                raise DocumentError(f"declared {declared}, generated {value}", name)
    else:
        if doc.dim is None or doc.coeffs is None:
            raise DocumentError("'dim' and 'coeffs' required", "coeffs")
        system = make_system(doc.dim, doc.coeffs)

    for role, spec in doc.rates.items():
        try:
            rates[role] = rate_from_spec(spec)
        except TrichotomyLabError as e:
            raise DocumentError(str(e), f"rates.{role}") from e
    if doc.params is not None:
        params = params.model_copy(update=doc.params.model_dump(exclude_none=True))

    if doc.projections is not None:
        p = doc.projections
        if doc.mode == "dichotomy":
            family = DiProjectionFamily.from_components(p.P1, p.P2)
        elif p.P3 is None:
            raise DocumentError("P3 required in trichotomy mode", "projections.P3")
        else:
            family = TriProjectionFamily.from_components(p.P1, p.P2, p.P3)
    elif doc.generate is not None and doc.mode == "dichotomy":
        raise DocumentError("generated documents are trichotomy documents", "mode")
    logger.debug("resolved %s document: dim %d, horizon %d", doc.mode, system.dim, system.horizon)
    return Problem(doc.mode, system, family, rates, params)


def system_document(
    system: LtvSystem,
    family: ProjectionFamily | None,
    rates: dict[str, RateSequence],
    params: dict[str, float],
    mode: Literal["trichotomy", "dichotomy"] = "trichotomy",
) -> SystemDocument:
    """Explicit coefficient document for numerical objects."""
    projections = None
    if family is not None:
        stacks = {f"P{i}": family.component(i).tolist() for i in range(1, family.n_components + 1)}
        projections = ProjectionsSpec(**stacks)
    return SystemDocument(
        version=SCHEMA_VERSION,
        mode=mode,
        dim=system.dim,
        horizon=system.horizon,
        coeffs=np.asarray(system.coeffs).tolist(),
        rates={role: rate.to_spec(system.horizon) for role, rate in rates.items()},
        params=ParamsSpec(**params),
        projections=projections,
    )


class ReportDocument(ReportModel):
    """Machine-readable output of one command."""

    tool: str = "trichotomy-lab"
    version: str = __version__
    command: str
    input_digest: str
    seed: int
    passed: bool
    reports: list[VerificationReport] = []
    checks: list[CheckResult] = []
    estimate: dict[str, Any] | None = None


def write_atomic(path: Path, text: str) -> None:
    """Write `text` to a temporary sibling, then rename it over `path`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        temp_path.write_text(text)
        temp_path.replace(path)
    except OSError:
        temp_path.unlink(missing_ok=True)
        raise


def dump(model: BaseModel) -> str:
    return model.model_dump_json(indent=2, exclude_none=True) + "\n"
