"""Fixture systems with trichotomy certificates known by construction."""

from __future__ import annotations

import logging
import math
from enum import StrEnum
from typing import Any, NamedTuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, field_validator, model_validator
from scipy.stats import ortho_group

from trichotomy_lab.base.errors import GeneratorError
from trichotomy_lab.base.projections import TriProjectionFamily
from trichotomy_lab.base.rates import ExponentialRate, RateSequence, rate_from_spec
from trichotomy_lab.base.system import LtvSystem, make_system
from trichotomy_lab.verify.params import BoundParams

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class BlockRole(StrEnum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    CENTRAL = "central"


class CentralVariant(StrEnum):
    IDENTITY = "identity"
    ALTERNATING = "alternating"


class Defect(StrEnum):
    BREAK_ANNIHILATION = "break-annihilation"
    BREAK_INVARIANCE = "break-invariance"
    KILL_KERNEL_DIRECTION = "kill-kernel-direction"
    SKEW_PROJECTIONS = "skew-projections"


class BlockSpec(BaseModel):
    """A diagonal block of the generated system."""

    role: BlockRole
    dim: int = Field(ge=0)


class NonuniformSpec(BaseModel):
    """Alternating-sign perturbation of the stable exponent."""

    eps: float = Field(gt=0)
    rule: str = "alternating"


class GeneratorSpec(BaseModel):
    """Recipe for a block-diagonal system with a known certificate."""

    horizon: int = Field(ge=1)
    blocks: list[BlockSpec] = Field(min_length=1)
    h: dict[str, Any] = {"kind": "exp", "lambda": 2.0}
    k: dict[str, Any] = {"kind": "exp", "lambda": 2.0}
    mu: dict[str, Any] = {"kind": "poly", "p": 1.0}
    nu: dict[str, Any] = {"kind": "poly", "p": 1.0}
    a: float = Field(default=1.0, gt=0)
    b: float = Field(default=1.0, ge=0)
    central: CentralVariant = CentralVariant.IDENTITY
    nonuniform: NonuniformSpec | None = None
    rotation_seed: int | None = None
    corruption: Defect | None = None

    @field_validator("h", "k", "mu", "nu")
    @classmethod
    def _check_rate(cls, spec: dict[str, Any]) -> dict[str, Any]:
        rate_from_spec(spec)
        return spec

    @model_validator(mode="after")
    def _check_shape(self) -> GeneratorSpec:
        if self.dim < 1:
            raise ValueError("blocks must add up to a positive dimension")
        if self.nonuniform is not None and self.nonuniform.eps >= self.a:
            raise ValueError(f"nonuniformity needs eps < a, got {self.nonuniform.eps} >= {self.a}")
        return self

    @property
    def dim(self) -> int:
        return sum(block.dim for block in self.blocks)

    def dim_of(self, role: BlockRole) -> int:
        return sum(block.dim for block in self.blocks if block.role is role)


class Triple(NamedTuple):
    """A system, its splitting and the constants it is certified for."""

    system: LtvSystem
    family: TriProjectionFamily
    params: BoundParams


def _stable_log_entries(
    h: RateSequence, a: float, horizon: int, nonuniform: NonuniformSpec | None
) -> FloatArray:
    """log of (h_n/h_{n+1})^a, perturbed by eps (-1)^{n+1} (log h_{n+1} + log h_n)."""
    log_h = h.log_values(np.arange(horizon + 1))
    entries = -a * np.diff(log_h)
    if nonuniform is not None:
        signs = np.where(np.arange(horizon) % 2 == 0, -1.0, 1.0)
        entries = entries + nonuniform.eps * signs * (log_h[1:] + log_h[:-1])
    return entries


def _central_log_entries(variant: CentralVariant, horizon: int) -> FloatArray:
    if variant is CentralVariant.IDENTITY:
        return np.zeros(horizon)
    return np.where(np.arange(horizon) % 2 == 0, math.log(2.0), -math.log(2.0))


def gen_block_diagonal(spec: GeneratorSpec) -> Triple:
    """Build the diagonal system, coordinate projections and certificate of `spec`.

    Stable entries are (h_n/h_{n+1})^a, unstable entries (k_{n+1}/k_n)^b and
    central entries 1 (or alternately 2 and 1/2). The certificate is K = 1,
    or K = 2 with an alternating central block. With a nonuniform spec the
    certified exponent becomes a - eps, the nonuniformity 2 eps and
    mu = nu = h.
    """
    h, k = rate_from_spec(spec.h), rate_from_spec(spec.k)
    horizon, dim = spec.horizon, spec.dim
    log_entries = {
        BlockRole.STABLE: _stable_log_entries(h, spec.a, horizon, spec.nonuniform),
        BlockRole.UNSTABLE: spec.b * np.diff(k.log_values(np.arange(horizon + 1))),
        BlockRole.CENTRAL: _central_log_entries(spec.central, horizon),
    }
    diagonal = np.empty((horizon, dim))
    selectors = {role: np.zeros(dim) for role in BlockRole}
    offset = 0
    for block in spec.blocks:
        diagonal[:, offset : offset + block.dim] = np.exp(log_entries[block.role])[:, None]
        selectors[block.role][offset : offset + block.dim] = 1.0
        offset += block.dim

    coeffs = np.zeros((horizon, dim, dim))
    coeffs[:, np.arange(dim), np.arange(dim)] = diagonal
    system = make_system(dim, coeffs)
    family = TriProjectionFamily.constant(
        np.diag(selectors[BlockRole.STABLE]),
        np.diag(selectors[BlockRole.UNSTABLE]),
        np.diag(selectors[BlockRole.CENTRAL]),
        horizon=horizon,
    )

    alternating = spec.central is CentralVariant.ALTERNATING and spec.dim_of(BlockRole.CENTRAL) > 0
    if spec.nonuniform is None:
        a, eps = spec.a, 0.0
        mu, nu = rate_from_spec(spec.mu), rate_from_spec(spec.nu)
    else:
        a, eps = spec.a - spec.nonuniform.eps, 2.0 * spec.nonuniform.eps
        mu = nu = h
    params = BoundParams(
        K=2.0 if alternating else 1.0, a=a, b=spec.b, eps=eps, h=h, k=k, mu=mu, nu=nu
    )
    logger.debug("generated %d-dimensional block-diagonal system over %d steps", dim, horizon)
    triple = Triple(system, family, params)
    if spec.rotation_seed is not None:
        triple = gen_rotated(triple, spec.rotation_seed)
    return triple


class ScalarCertificate(NamedTuple):
    triple: Triple
    witness: tuple[int, int] | None


def gen_nonuniform_scalar(a: float, eps: float, horizon: int) -> ScalarCertificate:
    """Scalar A_n = exp(-a + eps (-1)^{n+1} (2n+1)) with rates h = mu = e^n.

    A_m^n = exp(-a (m - n) + eps ((-1)^m m - (-1)^n n)), so the certificate is
    exponent a - eps, nonuniformity 2 eps and K = 1, attained at every pair
    with m even and n odd.

    Raises:
        GeneratorError: unless 0 <= eps < a.
    """
    if not 0 <= eps < a:
        raise GeneratorError(f"need 0 <= eps < a, got eps={eps}, a={a}")
    e_rate = {"kind": "exp", "lambda": math.e}
    spec = GeneratorSpec(
        horizon=horizon,
        blocks=[BlockSpec(role=BlockRole.STABLE, dim=1)],
        h=e_rate,
        k=e_rate,
        a=a,
        nonuniform=NonuniformSpec(eps=eps) if eps > 0 else None,
    )
    triple = gen_block_diagonal(spec)
    if eps == 0:
        h = ExponentialRate(math.e)
        params = triple.params.model_copy(update={"mu": h, "nu": h})
        triple = triple._replace(params=params)
    witness = (2, 1) if horizon >= 2 else None
    return ScalarCertificate(triple, witness)


def random_rotations(dim: int, steps: int, seed: int) -> FloatArray:
    """Draw `steps` Haar-distributed orthogonal d x d matrices."""
    rng = np.random.default_rng(seed)
    if dim == 1:
        return rng.choice([-1.0, 1.0], size=(steps, 1, 1))
    return np.asarray(ortho_group.rvs(dim, size=steps, random_state=rng)).reshape(steps, dim, dim)


def rotate(triple: Triple, rotations: npt.ArrayLike) -> Triple:
    """Change coordinates per step: A'_n = U_{n+1} A_n U_n^T and P'_n = U_n P_n U_n^T."""
    system, family, params = triple
    u = np.asarray(rotations, dtype=np.float64)
    if u.shape != (system.horizon + 1, system.dim, system.dim):
        expected = (system.horizon + 1, system.dim, system.dim)
        raise GeneratorError(f"rotations must have shape {expected}, got {u.shape}")
    if not np.allclose(u @ np.swapaxes(u, -1, -2), np.eye(system.dim), atol=1e-12):
        raise GeneratorError("rotations must be orthogonal")
    coeffs = u[1:] @ system.coeffs @ np.swapaxes(u[:-1], -1, -2)
    rotated = make_system(system.dim, coeffs)
    return Triple(rotated, family.truncated(system.horizon).conjugate(u), params)


def gen_rotated(triple: Triple, seed: int) -> Triple:
    """Conjugate `triple` by random per-step orthogonal matrices drawn from `seed`."""
    rotations = random_rotations(triple.system.dim, triple.system.horizon + 1, seed)
    logger.debug("rotating fixture with seed %d", seed)
    return rotate(triple, rotations)
