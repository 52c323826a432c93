"""Linear time-varying systems x_{n+1} = A_n x_n and their transition matrices."""

from __future__ import annotations

import logging
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import scipy.linalg

from trichotomy_lab.base.errors import (
    DimensionMismatchError,
    NonFiniteEntryError,
    WindowError,
)
from trichotomy_lab.base.report import CheckResult

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


class TransitionCache:
    """Memo table of transition matrices keyed by (m, n), m >= n.

    Entries are built by the left-multiplication recurrence
    A_{m+1}^n = A_m A_m^n starting from the identity. Concurrent readers are
    allowed; a key is inserted at most once and stored read-only.
    """

    def __init__(self, coeffs: FloatArray) -> None:
        self._coeffs = coeffs
        self._dim = coeffs.shape[1]
        self._table: dict[tuple[int, int], FloatArray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._table)

    def _insert(self, key: tuple[int, int], value: FloatArray) -> FloatArray:
        value.setflags(write=False)
        with self._lock:
            return self._table.setdefault(key, value)

    def get(self, m: int, n: int) -> FloatArray:
        """Return A_m^n, computing and caching missing links of the chain."""
        cached = self._table.get((m, n))
        if cached is not None:
            return cached
        start = m
        while start > n and (start, n) not in self._table:
            start -= 1
        current = self._table.get((start, n))
        if current is None:
            current = self._insert((n, n), np.eye(self._dim))
        for j in range(start, m):
            current = self._insert((j + 1, n), self._coeffs[j] @ current)
        return current

    def column(self, n: int, m_max: int) -> FloatArray:
        """Stack A_m^n for m = n..m_max into an array of shape (m_max-n+1, d, d)."""
        self.get(m_max, n)
        return np.stack([self._table[(m, n)] for m in range(n, m_max + 1)])


@dataclass(frozen=True)
class LtvSystem:
    """The system x_{n+1} = A_n x_n for n = 0..horizon-1 on R^dim."""

    dim: int
    coeffs: FloatArray
    cache: TransitionCache = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cache", TransitionCache(self.coeffs))

    @property
    def horizon(self) -> int:
        """Number of steps N; transitions are defined on 0 <= n <= m <= N."""
        return int(self.coeffs.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LtvSystem):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash((self.dim, self.coeffs.tobytes()))

    def check_window(self, window: int) -> None:
        """Raise if `window` is not inside 0..horizon."""
        if not 0 <= window <= self.horizon:
            raise WindowError(f"window {window} outside 0..{self.horizon}")

    def check_pair(self, m: int, n: int) -> None:
        """Raise unless (m, n) is admissible: 0 <= n <= m <= horizon."""
        if n < 0 or m < n:
            raise WindowError(f"pair (m={m}, n={n}) requires 0 <= n <= m")
        if m > self.horizon:
            raise WindowError(f"pair (m={m}, n={n}) beyond horizon {self.horizon}")


def make_system(dim: int, coeffs: Sequence[npt.ArrayLike] | npt.ArrayLike) -> LtvSystem:
    """Validate coefficient operators and build an `LtvSystem`.

    Args:
        dim: State dimension d.
        coeffs: Sequence of d x d operators A_0..A_{N-1}.

    Returns:
        The validated system with horizon N = len(coeffs).

    Raises:
        DimensionMismatchError: empty input or an operator that is not d x d.
        NonFiniteEntryError: an entry is NaN or Inf.
    """
    if dim < 1:
        raise DimensionMismatchError(f"dimension must be positive, got {dim}")
    operators = list(coeffs)  # type: ignore[arg-type]
    if not operators:
        raise DimensionMismatchError("at least one coefficient operator is required")
    stacked = np.empty((len(operators), dim, dim), dtype=np.float64)
    for step, op in enumerate(operators):
        arr = np.asarray(op, dtype=np.float64)
        if arr.shape != (dim, dim):
            raise DimensionMismatchError(
                f"A_{step} has shape {arr.shape}, expected ({dim}, {dim})"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntryError(f"A_{step} contains a non-finite entry")
        stacked[step] = arr
    stacked.setflags(write=False)
    return LtvSystem(dim=dim, coeffs=stacked)


def transition(sys: LtvSystem, m: int, n: int, *, use_cache: bool = True) -> FloatArray:
    """Return the transition matrix A_m^n = A_{m-1} ... A_n (identity when m = n)."""
    sys.check_pair(m, n)
    if use_cache:
        return sys.cache.get(m, n)
    result = np.eye(sys.dim)
    for j in range(n, m):
        result = sys.coeffs[j] @ result
    return result


def apply(sys: LtvSystem, m: int, n: int, x: npt.ArrayLike) -> FloatArray:
    """Evolve the state x from step n to step m."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (sys.dim,):
        raise DimensionMismatchError(f"state has shape {vec.shape}, expected ({sys.dim},)")
    return transition(sys, m, n) @ vec


def solution(sys: LtvSystem, x0: npt.ArrayLike, n0: int, m: int) -> FloatArray:
    """Return the trajectory x_{n0}, ..., x_m starting from x_{n0} = x0."""
    sys.check_pair(m, n0)
    vec = np.asarray(x0, dtype=np.float64)
    if vec.shape != (sys.dim,):
        raise DimensionMismatchError(f"state has shape {vec.shape}, expected ({sys.dim},)")
    states = np.empty((m - n0 + 1, sys.dim))
    states[0] = vec
    for j in range(n0, m):
        states[j - n0 + 1] = sys.coeffs[j] @ states[j - n0]
    return states


def check_propagator(sys: LtvSystem, window: int, tol: float = 1e-10) -> CheckResult:
    """Assert A_m^n A_n^p = A_m^p for all 0 <= p <= n <= m <= window.

    The deviation is measured in Frobenius norm relative to ||A_m^n|| ||A_n^p||,
    the scale of the rounding error of the product.
    """
    sys.check_window(window)
    worst = 0.0
    location: list[int] = []
    for p in range(window + 1):
        from_p = sys.cache.column(p, window)
        for n in range(p, window + 1):
            from_n = sys.cache.column(n, window)
            composed = from_n @ from_p[n - p]
            direct = from_p[n - p :]
            diff = np.linalg.norm(composed - direct, axis=(1, 2))
            scale = np.linalg.norm(from_n, axis=(1, 2)) * np.linalg.norm(from_p[n - p])
            rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), diff)
            idx = int(np.argmax(rel))
            if rel[idx] > worst:
                worst = float(rel[idx])
                location = [n + idx, n, p]
    passed = worst <= tol
    logger.debug("propagator check on window %d: worst deviation %.3e", window, worst)
    return CheckResult(
        name="propagator",
        passed=passed,
        worst=worst,
        location=location,
        message="" if passed else f"relative deviation {worst:.3e} exceeds {tol:.1e}",
    )


def is_reversible(sys: LtvSystem, tol: float = 1e-12) -> CheckResult:
    """Check every A_n is invertible, i.e. its smallest singular value exceeds `tol`.

    `per_step` lists the smallest singular value of each A_n; `passed` is the
    boolean verdict and `location` the first singular step.
    """
    sigma_min = np.array(
        [scipy.linalg.svd(a, compute_uv=False)[-1] for a in sys.coeffs], dtype=np.float64
    )
    singular = np.flatnonzero(sigma_min <= tol)
    passed = singular.size == 0
    return CheckResult(
        name="reversible",
        passed=passed,
        worst=float(sigma_min.min()),
        location=[] if passed else [int(singular[0])],
        per_step=sigma_min.tolist(),
        message=(
            f"all steps have smallest singular value > {tol:.1e}"
            if passed
            else f"steps {singular.tolist()} have smallest singular value <= {tol:.1e}"
        ),
    )
