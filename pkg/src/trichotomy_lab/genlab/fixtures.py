"""Named fixtures and materialization of generator specs."""

from __future__ import annotations

import math
from collections.abc import Callable

from trichotomy_lab.base.errors import GeneratorError
from trichotomy_lab.genlab.corruption import corrupt
from trichotomy_lab.genlab.generators import (
    BlockRole,
    BlockSpec,
    CentralVariant,
    GeneratorSpec,
    NonuniformSpec,
    Triple,
    gen_block_diagonal,
)

E_RATE = {"kind": "exp", "lambda": math.e}
POLY_RATE = {"kind": "poly", "p": 1.0}
E1_U_SEED = 42


def materialize(spec: GeneratorSpec) -> Triple:
    """Generate the triple of `spec`, rotated and corrupted as it requests."""
    triple = gen_block_diagonal(spec)
    if spec.corruption is not None:
        triple = corrupt(triple, spec.corruption)
    return triple


def _blocks(stable: int = 1, unstable: int = 1, central: int = 1) -> list[BlockSpec]:
    return [
        BlockSpec(role=BlockRole.STABLE, dim=stable),
        BlockSpec(role=BlockRole.UNSTABLE, dim=unstable),
        BlockSpec(role=BlockRole.CENTRAL, dim=central),
    ]


def e1_spec(horizon: int = 10) -> GeneratorSpec:
    """diag(1/2, 2, 1) with h = k = 2^n, mu = nu = n + 1 and (K, a, b, eps) = (1, 1, 1, 0)."""
    return GeneratorSpec(horizon=horizon, blocks=_blocks())


def e1_rotated_spec(horizon: int = 10, seed: int = E1_U_SEED) -> GeneratorSpec:
    return e1_spec(horizon).model_copy(update={"rotation_seed": seed})


def dichotomy_spec(horizon: int = 10) -> GeneratorSpec:
    """E1 without its central direction, so P^3 = 0."""
    return GeneratorSpec(horizon=horizon, blocks=_blocks(central=0))


def polynomial_spec(horizon: int = 10) -> GeneratorSpec:
    """Stable entries (n+1)/(n+2) and unstable entries (n+2)/(n+1)."""
    return GeneratorSpec(horizon=horizon, blocks=_blocks(), h=POLY_RATE, k=POLY_RATE)


def alternating_spec(horizon: int = 10) -> GeneratorSpec:
    """Polynomial rates with central entries alternating 2 and 1/2, certified with K = 2.

    The sharp central constants are 2 (n + 1) / (n + 2) over the last even or
    odd start step n, so they exceed 1 and tend to 2 as the window grows.
    """
    return polynomial_spec(horizon).model_copy(update={"central": CentralVariant.ALTERNATING})


def e2_spec(horizon: int = 40) -> GeneratorSpec:
    """Scalar A_n = exp(-1 + (-1)^{n+1} (2n+1) / 4), certified with a = 0.75, eps = 0.5."""
    return GeneratorSpec(
        horizon=horizon,
        blocks=[BlockSpec(role=BlockRole.STABLE, dim=1)],
        h=E_RATE,
        k=E_RATE,
        a=1.0,
        nonuniform=NonuniformSpec(eps=0.25),
    )


def e2_embedded_spec(horizon: int = 40) -> GeneratorSpec:
    """E2 as the stable block of a 3 x 3 system with unstable entry e and central entry 1."""
    return e2_spec(horizon).model_copy(update={"blocks": _blocks()})


FIXTURES: dict[str, Callable[[], GeneratorSpec]] = {
    "e1": e1_spec,
    "e1-u": e1_rotated_spec,
    "e1-dichotomy": dichotomy_spec,
    "e1-poly": polynomial_spec,
    "e1-alternating": alternating_spec,
    "e2": e2_spec,
    "e2-embedded": e2_embedded_spec,
}


def fixture(name: str) -> Triple:
    """Materialize one of the named fixtures."""
    try:
        factory = FIXTURES[name]
    except KeyError as e:
        raise GeneratorError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from e
    return materialize(factory())
