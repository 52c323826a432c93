"""Brute-force lower bounds on sharp constants by sampling unit vectors."""

from __future__ import annotations

import logging

import dask
import numpy as np
import numpy.typing as npt

from trichotomy_lab.base.errors import GeneratorError
from trichotomy_lab.base.projections import range_basis
from trichotomy_lab.base.settings import LabSettings, get_settings
from trichotomy_lab.base.system import LtvSystem
from trichotomy_lab.verify.spectral import Direction, InequalityPattern

logger = logging.getLogger(__name__)


def _sample_column(
    sys: LtvSystem,
    basis: npt.NDArray[np.float64],
    n: int,
    window: int,
    pattern: InequalityPattern,
    samples: int,
    seed: int,
) -> float:
    if basis.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng([seed, n])
    coords = rng.standard_normal((basis.shape[1], samples))
    vectors = basis @ (coords / np.linalg.norm(coords, axis=0))
    images = np.linalg.norm(sys.cache.column(n, window) @ vectors, axis=1)  # (m, samples)
    env = np.exp(pattern.envelope.log_values(np.arange(n, window + 1), n))[:, None]
    with np.errstate(divide="ignore"):
        if pattern.direction is Direction.FORWARD_UPPER:
            ratios = images / env
        else:
            ratios = 1.0 / (env * images)
    return float(ratios.max())


def oracle_kmin(
    sys: LtvSystem,
    projections: npt.ArrayLike,
    pattern: InequalityPattern,
    window: int,
    samples: int = 1000,
    *,
    seed: int | None = None,
    settings: LabSettings | None = None,
) -> float:
    """Largest sampled ratio over unit vectors of Range P_n, for all pairs of the window.

    Each start step n draws from its own stream `default_rng([seed, n])`, so
    the value does not depend on scheduling. The result never exceeds the
    sharp constant; a zero projection gives 0.
    """
    if samples < 1:
        raise GeneratorError(f"samples must be positive, got {samples}")
    settings = settings or get_settings()
    seed = settings.seed if seed is None else seed
    sys.check_window(window)
    stack = np.asarray(projections, dtype=np.float64)
    tasks = [
        dask.delayed(_sample_column)(
            sys, range_basis(stack[n], settings.rank_tol), n, window, pattern, samples, seed
        )
        for n in range(window + 1)
    ]
    values = dask.compute(*tasks, **settings.scheduler_kwargs())
    best = max(values, default=0.0)
    logger.debug("oracle for %s with %d samples: %.12g", pattern.name, samples, best)
    return best
