"""Sharp constants of envelope inequalities via restricted singular values.

A bound ||A_m^n P_n x|| <= K env(m, n) ||P_n x|| holds for every x exactly
when K >= sigma_max(A_m^n restricted to Range P_n) / env(m, n); the backward
bound ||P_n x|| <= K env(m, n) ||A_m^n P_n x|| needs
K >= 1 / (env(m, n) sigma_min(...)). Sweeping all pairs of the window gives
the smallest admissible K together with a witness pair and direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Literal, NamedTuple

import dask
import numpy as np
import numpy.typing as npt
import scipy.linalg

from trichotomy_lab.base.errors import DimensionMismatchError, EnvelopeError, FamilyError
from trichotomy_lab.base.projections import ProjectionFamily, kernel_basis, range_basis
from trichotomy_lab.base.rates import RateSequence
from trichotomy_lab.base.report import FLAG_REVERSIBLE_SUBCASE, CheckResult, PatternResult
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import LtvSystem

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class Direction(StrEnum):
    FORWARD_UPPER = "forward-upper"
    BACKWARD_LOWER = "backward-lower"


@dataclass(frozen=True)
class Envelope:
    """env(m, n) = (r_n / r_m)**ratio_exponent * w**eps, w taken at n or at m."""

    rate: RateSequence
    ratio_exponent: float
    weight: RateSequence | None = None
    eps: float = 0.0
    weight_at: Literal["n", "m"] = "n"

    def log_values(self, ms: npt.NDArray[np.int64], n: int) -> FloatArray:
        """Return log env(m, n) for every m in `ms`."""
        steps_n = np.full(ms.shape, n, dtype=np.int64)
        logs = self.ratio_exponent * self.rate.log_ratio(steps_n, ms)
        if self.weight is not None and self.eps != 0.0:
            at = steps_n if self.weight_at == "n" else ms
            logs = logs + self.eps * self.weight.log_values(at)
        if not np.all(np.isfinite(logs)):
            raise EnvelopeError(f"envelope is not positive and finite for start step {n}")
        return logs

    def value(self, m: int, n: int) -> float:
        return math.exp(float(self.log_values(np.array([m]), n)[0]))


@dataclass(frozen=True)
class InequalityPattern:
    """One envelope inequality applied to one projection component."""

    name: str
    direction: Direction
    component: int
    envelope: Envelope


class RestrictedExtremes(NamedTuple):
    sigma_max: float
    sigma_min: float
    vacuous: bool


def restricted_extremes(
    m: npt.ArrayLike, basis: npt.ArrayLike, tol: float = 1e-10
) -> RestrictedExtremes:
    """Extremes of ||M v|| / ||v|| over nonzero v in the span of an orthonormal basis.

    An empty basis gives the vacuous pair (0, inf).
    """
    mat = np.asarray(m, dtype=np.float64)
    q = np.asarray(basis, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != mat.shape[1]:
        raise DimensionMismatchError(f"basis shape {q.shape} does not fit operator {mat.shape}")
    if q.shape[1] == 0:
        return RestrictedExtremes(0.0, math.inf, True)
    if np.linalg.norm(q.T @ q - np.eye(q.shape[1])) > tol:
        raise DimensionMismatchError("basis is not orthonormal")
    s = scipy.linalg.svd(mat @ q, compute_uv=False)
    return RestrictedExtremes(float(s[0]), float(s[-1]), False)


class _ColumnBest(NamedTuple):
    log_value: float
    m: int
    n: int
    vector: FloatArray


def _sweep_column(
    sys: LtvSystem,
    basis: FloatArray,
    n: int,
    window: int,
    pattern: InequalityPattern,
) -> _ColumnBest | None:
    """Best ratio over m = n..window for one start step n."""
    if basis.shape[1] == 0:
        return None
    ms = np.arange(n, window + 1)
    log_env = pattern.envelope.log_values(ms, n)
    restricted = sys.cache.column(n, window) @ basis
    _, s, vh = np.linalg.svd(restricted, full_matrices=False)
    with np.errstate(divide="ignore"):
        if pattern.direction is Direction.FORWARD_UPPER:
            log_vals = np.log(s[:, 0]) - log_env
            vectors = vh[:, 0, :]
        else:
            log_vals = -(np.log(s[:, -1]) + log_env)
            vectors = vh[:, -1, :]
    idx = int(np.argmax(log_vals))
    return _ColumnBest(float(log_vals[idx]), n + idx, n, basis @ vectors[idx])


def _reduce(columns: list[_ColumnBest | None]) -> _ColumnBest | None:
    """Max value; ties go to the earliest terminal step m, then the shortest span."""
    present = [c for c in columns if c is not None]
    if not present:
        return None
    return max(present, key=lambda c: (c.log_value, -c.m, c.n))


def _require_invariant(sys: LtvSystem, projections: FloatArray, window: int, tol: float) -> None:
    a = sys.coeffs[:window]
    dev = np.linalg.norm(a @ projections[:window] - projections[1 : window + 1] @ a, axis=(1, 2))
    norms = np.linalg.norm(a, axis=(1, 2)) * np.linalg.norm(projections[:window], axis=(1, 2))
    scale = np.maximum(1.0, norms)
    rel = dev / scale
    if rel.size and rel.max() > tol:
        step = int(np.argmax(rel))
        raise FamilyError(f"projection not invariant at step {step}: {rel.max():.3e}")


def sweep_kmin(
    sys: LtvSystem,
    projections: npt.ArrayLike,
    pattern: InequalityPattern,
    window: int,
    *,
    check: bool = True,
    settings: LabSettings | None = None,
) -> PatternResult:
    """Smallest K for `pattern` on all pairs 0 <= n <= m <= window.

    Args:
        sys: The system whose transition matrices are bounded.
        projections: (N+1, d, d) stack of the projection the bound applies to.
        pattern: Envelope, direction and label of the inequality.
        window: Last step of the sweep.
        check: Verify invariance of `projections` before sweeping.
        settings: Tolerances and parallelism; defaults to the global settings.
    """
    settings = settings or get_settings()
    sys.check_window(window)
    stack = np.asarray(projections, dtype=np.float64)
    if stack.shape[0] < window + 1 or stack.shape[1:] != (sys.dim, sys.dim):
        raise DimensionMismatchError(
            f"projection stack {stack.shape} does not cover window {window}"
        )
    if check:
        _require_invariant(sys, stack, window, settings.projection_tol)
    bases = [range_basis(stack[n], settings.rank_tol) for n in range(window + 1)]
    tasks = [
        dask.delayed(_sweep_column)(sys, bases[n], n, window, pattern) for n in range(window + 1)
    ]
    logger.debug("sweeping %s over %d start steps", pattern.name, len(tasks))
    columns = list(dask.compute(*tasks, **settings.scheduler_kwargs()))
    best = _reduce(columns)
    if best is None:
        return PatternResult(
            name=pattern.name,
            direction=pattern.direction.value,
            component=pattern.component,
            k_min=0.0,
            log_k_min=-math.inf,
            vacuous=True,
        )
    k_min = math.exp(best.log_value) if best.log_value < 709.0 else math.inf
    logger.info("%s: K_min = %.12g at (m, n) = (%d, %d)", pattern.name, k_min, best.m, best.n)
    return PatternResult(
        name=pattern.name,
        direction=pattern.direction.value,
        component=pattern.component,
        k_min=k_min,
        log_k_min=best.log_value,
        witness=(best.m, best.n),
        witness_vector=best.vector.tolist(),
    )


def kmin_forward(
    sys: LtvSystem,
    projections: npt.ArrayLike,
    envelope: Envelope,
    window: int,
    *,
    name: str = "forward",
    component: int = 1,
    check: bool = True,
    settings: LabSettings | None = None,
) -> PatternResult:
    """K_min of ||A_m^n P_n x|| <= K env(m, n) ||P_n x||."""
    pattern = InequalityPattern(name, Direction.FORWARD_UPPER, component, envelope)
    return sweep_kmin(sys, projections, pattern, window, check=check, settings=settings)


def kmin_backward(
    sys: LtvSystem,
    projections: npt.ArrayLike,
    envelope: Envelope,
    window: int,
    *,
    name: str = "backward",
    component: int = 2,
    check: bool = True,
    settings: LabSettings | None = None,
) -> PatternResult:
    """K_min of ||P_n x|| <= K env(m, n) ||A_m^n P_n x||; +inf if the restriction is singular."""
    pattern = InequalityPattern(name, Direction.BACKWARD_LOWER, component, envelope)
    return sweep_kmin(sys, projections, pattern, window, check=check, settings=settings)


def evaluate_witness(sys: LtvSystem, result: PatternResult, envelope: Envelope) -> float:
    """Recompute the ratio at a reported witness pair and direction."""
    if result.witness is None:
        return 0.0
    m, n = result.witness
    x = np.asarray(result.witness_vector)
    image = np.linalg.norm(sys.cache.get(m, n) @ x) / np.linalg.norm(x)
    env = envelope.value(m, n)
    if result.direction == Direction.FORWARD_UPPER:
        return float(image / env)
    return math.inf if image == 0 else float(1.0 / (env * image))


def _kernel_component(
    sys: LtvSystem,
    stack: FloatArray,
    i: int,
    window: int,
    tol: float,
    transport: FloatArray,
) -> CheckResult:
    kernels = [kernel_basis(stack[n], tol) for n in range(window + 1)]
    name = f"kernel-{i}"
    flags = []
    if i == 3 and not np.any(stack[: window + 1]):
        flags.append(FLAG_REVERSIBLE_SUBCASE)
        logger.warning("P^3 = 0: the i = 3 clause demands every A_n be invertible")

    def failed(location: list[int], message: str) -> CheckResult:
        return CheckResult(
            name=name,
            passed=False,
            worst=math.inf,
            location=location,
            message=message,
            flags=flags,
        )

    worst = 0.0
    for n in range(window):
        k_now, k_next = kernels[n], kernels[n + 1]
        if k_now.shape[1] != k_next.shape[1]:
            return failed(
                [n, i],
                f"dim Ker P_{n}^{i} = {k_now.shape[1]}, dim Ker P_{n + 1}^{i} = {k_next.shape[1]}",
            )
        if k_now.shape[1] == 0:
            continue
        image = sys.coeffs[n] @ k_now
        leak = np.linalg.norm(stack[n + 1] @ image) / max(1.0, np.linalg.norm(image))
        transport[n] = max(transport[n], float(leak))
        sigma_min = float(scipy.linalg.svd(image, compute_uv=False)[-1])
        if sigma_min <= tol:
            message = f"A_{n} not injective on Ker P_{n}^{i} (sigma_min {sigma_min:.3e})"
            return failed([n, i], message)
        worst = max(worst, 1.0 / sigma_min)

    for m, n in _multi_step_pairs(window):
        if kernels[n].shape[1] == 0:
            continue
        s = scipy.linalg.svd(sys.cache.get(m, n) @ kernels[n], compute_uv=False)
        if s[-1] <= tol or kernels[m].shape[1] != kernels[n].shape[1]:
            return failed([m, n, i], f"A_{m}^{n} is not an isomorphism on Ker P_{n}^{i}")
    return CheckResult(name=name, passed=True, worst=worst, flags=flags)


def check_kernel_isomorphism(
    sys: LtvSystem,
    fam: ProjectionFamily,
    components: tuple[int, ...] = (2, 3),
    window: int | None = None,
    tol: float = 1e-10,
) -> CheckResult:
    """Check that A_m^n restricted to Ker P_n^i is an isomorphism onto Ker P_m^i.

    Checked one step at a time: kernel dimensions agree at n and n+1 and the
    one-step restriction is injective (smallest singular value > tol). Short
    multi-step restrictions are spot-checked directly. How far A_n Ker P_n^i
    lies outside Ker P_{n+1}^i is recorded in `per_step`; that part follows
    from invariance and is judged by the invariance check.
    """
    window = sys.horizon if window is None else window
    sys.check_window(window)
    if fam.horizon < window:
        raise FamilyError(f"family horizon {fam.horizon} shorter than window {window}")
    transport = np.zeros(window)
    children = [
        _kernel_component(sys, fam.component(i), i, window, tol, transport) for i in components
    ]
    if transport.size and transport.max() > 1e-9:
        logger.warning(
            "kernels leak at step %d (%.3e)", int(np.argmax(transport)), float(transport.max())
        )
    result = CheckResult.combine("kernel-isomorphism", children)
    return result.model_copy(update={"per_step": transport.tolist()})


def _multi_step_pairs(window: int, span: int = 3) -> list[tuple[int, int]]:
    starts = sorted({0, window // 2, max(0, window - span)})
    return [(min(n + span, window), n) for n in starts if n < window]
