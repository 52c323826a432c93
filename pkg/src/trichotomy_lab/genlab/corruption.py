"""Minimal perturbations of a certified triple that break exactly one clause.

Defects assume self-adjoint projections, as every generated triple has.
"""

from __future__ import annotations

import logging

import numpy as np
import numpy.typing as npt
import scipy.linalg

from trichotomy_lab.base.errors import GeneratorError
from trichotomy_lab.base.projections import TriProjectionFamily, check_invariance, range_basis
from trichotomy_lab.base.system import LtvSystem, is_reversible, make_system
from trichotomy_lab.genlab.generators import Defect, Triple

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

DEFECT_STEP = 3


def _unit_in_range(p: FloatArray, what: str) -> FloatArray:
    basis = range_basis(p)
    if basis.shape[1] == 0:
        raise GeneratorError(f"cannot corrupt: Range {what} is trivial")
    return basis[:, 0]


def _transport(sys: LtvSystem, p0: FloatArray) -> FloatArray:
    """Carry P_0 along the system: P_{n+1} = A_n P_n A_n^{-1}."""
    if not is_reversible(sys).passed:
        raise GeneratorError("transporting a projection needs every A_n invertible")
    stack = np.empty((sys.horizon + 1, *p0.shape))
    stack[0] = p0
    for n, a in enumerate(sys.coeffs):
        # P A^{-1} = (A^{-T} P^T)^T
        stack[n + 1] = a @ scipy.linalg.solve(a.T, stack[n].T).T
    return stack


def _rank_one_shift(triple: Triple, sign_p1: float, sign_p2: float) -> Triple:
    system, family, params = triple
    u = _unit_in_range(family.p1[0], "P^1")
    w = _unit_in_range(family.p2[0], "P^2")
    shift = np.outer(u, w)
    p1 = _transport(system, family.p1[0] + sign_p1 * shift)
    p2 = _transport(system, family.p2[0] + sign_p2 * shift) if sign_p2 else family.p2
    return Triple(system, TriProjectionFamily.from_components(p1, p2, family.p3), params)


def _break_invariance(triple: Triple) -> Triple:
    system, family, params = triple
    if system.dim < 2:
        raise GeneratorError("break-invariance needs dimension >= 2")
    step = min(DEFECT_STEP, family.horizon)
    for i in range(system.dim):
        for j in range(i + 1, system.dim):
            rotation = np.eye(system.dim)
            rotation[[i, j], [i, j]] = 0.0
            rotation[i, j], rotation[j, i] = -1.0, 1.0
            components = np.array(family.components)
            components[step] = rotation @ components[step] @ rotation.T
            candidate = TriProjectionFamily(components)
            if not check_invariance(system, candidate).passed:
                logger.debug("rotated step %d in the (%d, %d) plane", step, i, j)
                return Triple(system, candidate, params)
    raise GeneratorError("no coordinate rotation breaks invariance for this triple")


def _kill_kernel_direction(triple: Triple) -> Triple:
    system, family, params = triple
    step = min(DEFECT_STEP, system.horizon - 1)
    target = family.p3[step] if np.any(family.p3[step]) else family.p1[step]
    u = _unit_in_range(target, "P^3 or P^1")
    coeffs = np.array(system.coeffs)
    coeffs[step] = coeffs[step] - coeffs[step] @ np.outer(u, u)
    return Triple(make_system(system.dim, coeffs), family, params)


def corrupt(triple: Triple, defect: Defect | str) -> Triple:
    """Return a copy of `triple` violating only the clause named by `defect`.

    break-annihilation shifts P^1 by a rank-one term so that P^1 P^2 != 0;
    skew-projections shears P^1 and P^2 against each other, keeping every
    algebraic identity but making the ranges oblique; break-invariance
    rotates all projections of one step; kill-kernel-direction removes a
    central (or stable) direction from one A_n, which leaves Ker P^2 without
    an injective image.

    Raises:
        GeneratorError: unknown defect or a triple the defect cannot apply to.
    """
    try:
        defect = Defect(defect)
    except ValueError as e:
        raise GeneratorError(f"unknown defect {defect!r}") from e
    logger.info("applying defect %s", defect.value)
    if defect is Defect.BREAK_ANNIHILATION:
        return _rank_one_shift(triple, -1.0, 0.0)
    if defect is Defect.SKEW_PROJECTIONS:
        return _rank_one_shift(triple, 1.0, -1.0)
    if defect is Defect.BREAK_INVARIANCE:
        return _break_invariance(triple)
    return _kill_kernel_direction(triple)
