"""Per-step projection families and the algebra relating their splittings.

A family stores, for every step n = 0..N, a fixed number of d x d operators
(three for a trichotomy splitting, two for a dichotomy splitting, four for
the R-reformulation). Validators report the worst violation and where it
occurs; conversions refuse inputs that fail their own validator.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import ClassVar, Self

import numpy as np
import numpy.typing as npt
import scipy.linalg

from trichotomy_lab.base.errors import (
    DimensionMismatchError,
    FamilyError,
    IncompatibleSplittingError,
    NonFiniteEntryError,
)
from trichotomy_lab.base.report import CheckResult
from trichotomy_lab.base.system import LtvSystem

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

DEFAULT_TOL = 1e-9


class ProjectionFamily(ABC):
    """Operators P_n^1..P_n^c for n = 0..horizon, stored as (N+1, c, d, d)."""

    n_components: ClassVar[int]

    def __init__(self, components: npt.ArrayLike) -> None:
        arr = np.array(components, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[1] != self.n_components or arr.shape[2] != arr.shape[3]:
            raise DimensionMismatchError(
                f"{type(self).__name__} expects shape (N+1, {self.n_components}, d, d),"
                f" got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntryError(f"{type(self).__name__} contains a non-finite entry")
        arr.setflags(write=False)
        self.components = arr

    @classmethod
    def from_components(cls, *parts: npt.ArrayLike) -> Self:
        """Build from one (N+1, d, d) stack per component."""
        if len(parts) != cls.n_components:
            raise DimensionMismatchError(
                f"{cls.__name__} needs {cls.n_components} components, got {len(parts)}"
            )
        stacks = [np.asarray(p, dtype=np.float64) for p in parts]
        if len({s.shape for s in stacks}) != 1 or stacks[0].ndim != 3:
            raise DimensionMismatchError("components must be equally shaped (N+1, d, d) stacks")
        return cls(np.stack(stacks, axis=1))

    @classmethod
    def constant(cls, *mats: npt.ArrayLike, horizon: int) -> Self:
        """Repeat fixed d x d operators on every step 0..horizon."""
        stacks = [
            np.broadcast_to(np.asarray(m, dtype=np.float64), (horizon + 1, *np.shape(m)))
            for m in mats
        ]
        return cls.from_components(*stacks)

    @property
    def horizon(self) -> int:
        return int(self.components.shape[0] - 1)

    @property
    def dim(self) -> int:
        return int(self.components.shape[2])

    def component(self, i: int) -> FloatArray:
        """Return the (N+1, d, d) stack of component i (1-based)."""
        if not 1 <= i <= self.n_components:
            raise IndexError(f"component {i} outside 1..{self.n_components}")
        return self.components[:, i - 1]

    def at(self, n: int) -> FloatArray:
        """Return the (c, d, d) operators of step n."""
        return self.components[n]

    def conjugate(self, rotations: npt.ArrayLike) -> Self:
        """Return U_n P_n U_n^T for per-step orthogonal U_n of shape (N+1, d, d)."""
        u = np.asarray(rotations, dtype=np.float64)[:, None]
        return type(self)(u @ self.components @ np.swapaxes(u, -1, -2))

    def truncated(self, horizon: int) -> Self:
        """Restrict to steps 0..horizon."""
        return type(self)(self.components[: horizon + 1])

    def max_deviation(self, other: ProjectionFamily) -> float:
        """Largest entrywise difference to another family of the same shape."""
        if other.components.shape != self.components.shape:
            return float("inf")
        return float(np.max(np.abs(self.components - other.components)))

    def idempotence(self, tol: float = DEFAULT_TOL) -> CheckResult:
        """(P_n^i)^2 = P_n^i for every step and component."""
        comps = self.components
        return _stack_check("idempotence", comps @ comps, comps, tol, _norms(comps))

    @abstractmethod
    def validate(self, tol: float = DEFAULT_TOL) -> CheckResult:
        """Check the algebraic identities that define this family type."""

    def require_valid(self, tol: float = DEFAULT_TOL) -> None:
        """Raise `FamilyError` unless `validate` passes."""
        result = self.validate(tol)
        if not result.passed:
            raise FamilyError(f"invalid {type(self).__name__}: {result.message}")


class TriProjectionFamily(ProjectionFamily):
    """Trichotomy splitting (P^1 stable, P^2 unstable, P^3 central)."""

    n_components = 3

    @property
    def p1(self) -> FloatArray:
        return self.components[:, 0]

    @property
    def p2(self) -> FloatArray:
        return self.components[:, 1]

    @property
    def p3(self) -> FloatArray:
        return self.components[:, 2]

    def validate(self, tol: float = DEFAULT_TOL) -> CheckResult:
        return validate_tri(self, tol)


class DiProjectionFamily(ProjectionFamily):
    """Dichotomy splitting (first, second) with first + second = I."""

    n_components = 2

    @property
    def first(self) -> FloatArray:
        return self.components[:, 0]

    @property
    def second(self) -> FloatArray:
        return self.components[:, 1]

    def validate(self, tol: float = DEFAULT_TOL) -> CheckResult:
        eye = np.eye(self.dim)
        first, second = self.first, self.second
        return CheckResult.combine(
            "di-projections",
            [
                self.idempotence(tol),
                _stack_check("resolution", first + second, eye, tol),
                _annihilation([(1, first), (2, second)], tol),
            ],
        )


class QuadProjectionFamily(ProjectionFamily):
    """Four-projection reformulation R^1..R^4 of a trichotomy splitting."""

    n_components = 4

    def validate(self, tol: float = DEFAULT_TOL) -> CheckResult:
        eye = np.eye(self.dim)
        r1, r2, r3, r4 = (self.component(i) for i in range(1, 5))
        return CheckResult.combine(
            "quad-projections",
            [
                self.idempotence(tol),
                _stack_check("resolution-1-4", r1 + r4, eye, tol),
                _stack_check("resolution-2-3", r2 + r3, eye, tol),
                _annihilation([(1, r1), (2, r2)], tol),
                _stack_check("commutation-3-4", r3 @ r4, r4 @ r3, tol, _norms(r3) * _norms(r4)),
            ],
        )


def _norms(stack: FloatArray) -> FloatArray:
    return np.linalg.norm(stack, axis=(-2, -1))


def _stack_check(
    name: str,
    lhs: FloatArray,
    rhs: FloatArray | npt.ArrayLike,
    tol: float,
    scale: FloatArray | None = None,
) -> CheckResult:
    """Compare two stacks step by step in Frobenius norm, relative to max(1, scale)."""
    dev = np.linalg.norm(lhs - rhs, axis=(-2, -1))
    if scale is not None:
        dev = dev / np.maximum(1.0, scale)
    flat = dev.reshape(dev.shape[0], -1).max(axis=1)
    step = int(np.argmax(flat))
    worst = float(flat[step])
    passed = worst <= tol
    location = [step]
    if dev.ndim > 1:
        location.append(int(np.argmax(dev[step])) + 1)
    return CheckResult(
        name=name,
        passed=passed,
        worst=worst,
        location=location,
        message="" if passed else f"deviation {worst:.3e} at step {step}",
    )


def _annihilation(parts: list[tuple[int, FloatArray]], tol: float) -> CheckResult:
    """P^i P^j = 0 for all ordered pairs i != j."""
    checks = []
    for i, pi in parts:
        for j, pj in parts:
            if i != j:
                scale = _norms(pi) * _norms(pj)
                checks.append(_stack_check(f"annihilation-{i}{j}", pi @ pj, 0.0, tol, scale))
    return CheckResult.combine("annihilation", checks)


def validate_tri(fam: TriProjectionFamily, tol: float = DEFAULT_TOL) -> CheckResult:
    """Check idempotence, P^1 + P^2 + P^3 = I and P^i P^j = 0 for i != j."""
    return CheckResult.combine(
        "tri-projections",
        [
            fam.idempotence(tol),
            _stack_check("resolution", fam.p1 + fam.p2 + fam.p3, np.eye(fam.dim), tol),
            _annihilation([(1, fam.p1), (2, fam.p2), (3, fam.p3)], tol),
        ],
    )


def validate_pair(pair: DiProjectionFamily, tol: float = DEFAULT_TOL) -> CheckResult:
    """Check that two projections are idempotent and mutually annihilating.

    Unlike `DiProjectionFamily.validate` the pair need not resolve the identity.
    """
    return CheckResult.combine(
        "orthogonal-pair",
        [pair.idempotence(tol), _annihilation([(1, pair.first), (2, pair.second)], tol)],
    )


def check_invariance(
    sys: LtvSystem, fam: ProjectionFamily, tol: float = DEFAULT_TOL
) -> CheckResult:
    """Check A_n P_n^i = P_{n+1}^i A_n, then spot-check A_m^n P_n = P_m A_m^n."""
    if fam.dim != sys.dim:
        raise DimensionMismatchError(f"family dimension {fam.dim} != system dimension {sys.dim}")
    if fam.horizon < sys.horizon:
        raise FamilyError(
            f"family horizon {fam.horizon} shorter than system horizon {sys.horizon}"
        )
    horizon = sys.horizon
    a = sys.coeffs[:, None]
    comps = fam.components
    after = comps[1 : horizon + 1]
    scale = _norms(a) * np.maximum(_norms(comps[:horizon]), _norms(after))
    step = _stack_check("step-invariance", a @ comps[:horizon], after @ a, tol, scale)

    spot_worst = 0.0
    spot_location: list[int] = []
    for m, n in _spot_pairs(horizon):
        transfer = sys.cache.get(m, n)
        dev = np.linalg.norm(transfer @ comps[n] - comps[m] @ transfer, axis=(-2, -1))
        rel = dev / np.maximum(1.0, np.linalg.norm(transfer) * _norms(comps[n]))
        if rel.max() > spot_worst:
            spot_worst = float(rel.max())
            spot_location = [m, n, int(np.argmax(rel)) + 1]
    passed = spot_worst <= tol
    spot = CheckResult(
        name="transported-invariance",
        passed=passed,
        worst=spot_worst,
        location=spot_location,
        message="" if passed else f"deviation {spot_worst:.3e} at (m, n, i) = {spot_location}",
    )
    return CheckResult.combine("invariance", [step, spot])


def _spot_pairs(horizon: int) -> list[tuple[int, int]]:
    pairs = {(horizon, 0), (horizon, horizon // 2), (horizon // 2, 0)}
    for n in range(0, horizon, max(1, horizon // 4)):
        pairs.add((min(n + 2, horizon), n))
    return sorted(pairs)


def tri_to_two(fam: TriProjectionFamily, tol: float = DEFAULT_TOL) -> DiProjectionFamily:
    """Return (Q^1, Q^2) = (P^1, P^2 + P^3)."""
    fam.require_valid(tol)
    return DiProjectionFamily.from_components(fam.p1, fam.p2 + fam.p3)


def tri_from_pair(pair: DiProjectionFamily) -> TriProjectionFamily:
    """Return (Q^1, Q^2, I - Q^1 - Q^2)."""
    eye = np.eye(pair.dim)
    central = eye - pair.first - pair.second
    return TriProjectionFamily.from_components(pair.first, pair.second, central)


def tri_to_four(fam: TriProjectionFamily, tol: float = DEFAULT_TOL) -> QuadProjectionFamily:
    """Return (R^1, R^2, R^3, R^4) = (P^1, P^2, P^1 + P^3, P^2 + P^3)."""
    fam.require_valid(tol)
    return QuadProjectionFamily.from_components(fam.p1, fam.p2, fam.p1 + fam.p3, fam.p2 + fam.p3)


def four_to_tri(quad: QuadProjectionFamily, tol: float = DEFAULT_TOL) -> TriProjectionFamily:
    """Return (P^1, P^2, P^3) = (R^1, R^2, R^3 R^4)."""
    quad.require_valid(tol)
    return TriProjectionFamily.from_components(
        quad.component(1), quad.component(2), quad.component(3) @ quad.component(4)
    )


def make_S(fam: TriProjectionFamily, tol: float = DEFAULT_TOL) -> DiProjectionFamily:  # noqa: N802
    """Return S = (P^1, P^2 + P^3), the splitting carried by the B-system."""
    return tri_to_two(fam, tol)


def make_T(fam: TriProjectionFamily, tol: float = DEFAULT_TOL) -> DiProjectionFamily:  # noqa: N802
    """Return T = (P^1 + P^3, P^2), the splitting carried by the C-system."""
    fam.require_valid(tol)
    return DiProjectionFamily.from_components(fam.p1 + fam.p3, fam.p2)


def check_ST_identities(  # noqa: N802
    S: DiProjectionFamily,  # noqa: N803
    T: DiProjectionFamily,  # noqa: N803
    tol: float = DEFAULT_TOL,
) -> CheckResult:
    """Check every identity linking two nested dichotomy splittings S and T."""
    if S.components.shape != T.components.shape:
        raise DimensionMismatchError(
            f"S and T shapes differ: {S.components.shape} vs {T.components.shape}"
        )
    eye = np.eye(S.dim)
    s1, s2, t1, t2 = S.first, S.second, T.first, T.second
    scale = _norms(S.components).max(axis=1) * _norms(T.components).max(axis=1)

    def identity(name: str, lhs: FloatArray, rhs: FloatArray | float) -> CheckResult:
        return _stack_check(name, lhs, rhs, tol, scale)

    checks = [
        _stack_check("S-resolution", s1 + s2, eye, tol),
        _stack_check("T-resolution", t1 + t2, eye, tol),
        identity("S1S2", s1 @ s2, 0.0),
        identity("S2S1", s2 @ s1, 0.0),
        identity("T1T2", t1 @ t2, 0.0),
        identity("T2T1", t2 @ t1, 0.0),
        identity("S1T1", s1 @ t1, s1),
        identity("T1S1", t1 @ s1, s1),
        identity("S2T1=T1S2", s2 @ t1, t1 @ s2),
        identity("T1S2=S2-T2", t1 @ s2, s2 - t2),
        identity("S2-T2=T1-S1", s2 - t2, t1 - s1),
        identity("T2S2", t2 @ s2, t2),
        identity("S2T2", s2 @ t2, t2),
        identity("T2S1", t2 @ s1, 0.0),
        identity("S1T2", s1 @ t2, 0.0),
        validate_pair(DiProjectionFamily.from_components(s1, t2), tol),
    ]
    return CheckResult.combine("st-identities", checks)


def reconstruct_P3(  # noqa: N802
    S: DiProjectionFamily,  # noqa: N803
    T: DiProjectionFamily,  # noqa: N803
    tol: float = DEFAULT_TOL,
) -> TriProjectionFamily:
    """Rebuild the trichotomy splitting (S^1, T^2, T^1 S^2) from S and T.

    Raises:
        IncompatibleSplittingError: the S/T identities fail.
    """
    identities = check_ST_identities(S, T, tol)
    if not identities.passed:
        raise IncompatibleSplittingError(f"S and T are not nested splittings: {identities.message}")
    return TriProjectionFamily.from_components(S.first, T.second, T.first @ S.second)


def check_range_orthogonality(
    fam: ProjectionFamily,
    tol: float = DEFAULT_TOL,
    samples: int = 100,
    seed: int = 0,
) -> CheckResult:
    """Check mutual orthogonality of component ranges and the Pythagoras equality.

    Range orthogonality is (P^i)^T P^j = 0 for i != j. The Pythagoras equality
    ||(P^i + P^j) x||^2 = ||P^i x||^2 + ||P^j x||^2 is tested on the standard
    basis plus `samples` random unit vectors per step. Both verdicts are
    reported as children.
    """
    comps = fam.components
    c = fam.n_components
    orth_checks = []
    for i in range(c):
        for j in range(c):
            if i != j:
                gram = np.swapaxes(comps[:, i], -1, -2) @ comps[:, j]
                scale = _norms(comps[:, i]) * _norms(comps[:, j])
                orth_checks.append(_stack_check(f"ranges-{i + 1}{j + 1}", gram, 0.0, tol, scale))
    orthogonal = CheckResult.combine("pairwise-orthogonality", orth_checks)

    rng = np.random.default_rng(seed)
    random_vectors = rng.standard_normal((fam.dim, samples))
    vectors = np.hstack([np.eye(fam.dim), random_vectors / np.linalg.norm(random_vectors, axis=0)])
    images = comps @ vectors  # (N+1, c, d, s)
    sq = np.sum(images**2, axis=-2)  # (N+1, c, s)
    worst = 0.0
    location: list[int] = []
    for i in range(c):
        for j in range(i + 1, c):
            joint = np.sum((images[:, i] + images[:, j]) ** 2, axis=-2)
            gap = np.abs(joint - sq[:, i] - sq[:, j]) / np.maximum(1.0, sq[:, i] + sq[:, j])
            step, col = np.unravel_index(int(np.argmax(gap)), gap.shape)
            if gap[step, col] > worst:
                worst = float(gap[step, col])
                location = [int(step), i + 1, j + 1]
    pythagoras = CheckResult(
        name="pythagoras",
        passed=worst <= tol,
        worst=worst,
        location=location,
        message="" if worst <= tol else f"Pythagoras gap {worst:.3e} at (n, i, j) = {location}",
    )
    return CheckResult.combine("range-orthogonality", [orthogonal, pythagoras])


def range_basis(p: FloatArray, tol: float = 1e-10) -> FloatArray:
    """Orthonormal basis (d x r) of Range p from a rank-revealing SVD."""
    u, s, _ = scipy.linalg.svd(p)
    rank = int(np.sum(s > tol * max(1.0, float(s[0]) if s.size else 0.0)))
    logger.debug("range rank %d (singular values %s)", rank, np.array2string(s, precision=3))
    return u[:, :rank]


def kernel_basis(p: FloatArray, tol: float = 1e-10) -> FloatArray:
    """Orthonormal basis (d x (d - r)) of Ker p from a rank-revealing SVD."""
    _, s, vh = scipy.linalg.svd(p)
    rank = int(np.sum(s > tol * max(1.0, float(s[0]) if s.size else 0.0)))
    logger.debug(
        "kernel dimension %d (singular values %s)",
        p.shape[1] - rank,
        np.array2string(s, precision=3),
    )
    return np.ascontiguousarray(vh[rank:].T)

