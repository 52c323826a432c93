"""Bound constants and rates for the trichotomy and FP-dichotomy inequalities."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from trichotomy_lab.base.rates import RateSequence


class BoundParams(BaseModel):
    """Constants K > 0, a > 0, b >= 0, eps >= 0 and the rates h, k, mu, nu."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: float = Field(gt=0)
    a: float = Field(gt=0)
    b: float = Field(ge=0)
    eps: float = Field(default=0.0, ge=0)
    h: RateSequence
    k: RateSequence
    mu: RateSequence
    nu: RateSequence

    def rates(self) -> dict[str, RateSequence]:
        return {"h": self.h, "k": self.k, "mu": self.mu, "nu": self.nu}


class DichotomyParams(BaseModel):
    """FP dichotomy with a single rate h (positive terms only) and exponent c."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: float = Field(gt=0)
    eps: float = Field(default=0.0, ge=0)
    c: float = Field(default=0.5, gt=0)
    h: RateSequence
    mu: RateSequence
    nu: RateSequence
