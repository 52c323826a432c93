#!/usr/bin/env python3
"""Write the canonical fixture documents into fixtures/."""

import json
import sys
from pathlib import Path

from trichotomy_lab.documents import (
    SCHEMA_VERSION,
    SystemDocument,
    dump,
    resolve,
    system_document,
    write_atomic,
)
from trichotomy_lab.genlab.fixtures import FIXTURES
from trichotomy_lab.verify.trichotomy import ExponentGrid

E2_GRID = ExponentGrid(a=[0.75, 1.0], eps=[0.0, 0.5])


def _json(content: object) -> str:
    return json.dumps(content, indent=2) + "\n"


def generate_fixtures(out_dir: Path, explicit: bool = False) -> None:
    """Write one generator document per named fixture.

    With `explicit`, also write the materialized coefficient documents to
    out_dir/explicit/.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, factory in FIXTURES.items():
        spec = factory()
        document = {
            "version": SCHEMA_VERSION,
            "generate": spec.model_dump(mode="json", exclude_defaults=True),
        }
        path = out_dir / f"{name}.json"
        write_atomic(path, _json(document))
        print(f"✓ {path}")

        if explicit:
            problem = resolve(SystemDocument.model_validate(document))
            materialized = system_document(
                problem.system,
                problem.family,
                problem.rates,
                problem.params.model_dump(exclude_none=True),
            )
            explicit_path = out_dir / "explicit" / f"{name}.json"
            write_atomic(explicit_path, dump(materialized))
            print(f"✓ {explicit_path}")

    grid_path = out_dir / "e2-grid.json"
    write_atomic(grid_path, _json(E2_GRID.model_dump(exclude={"b"})))
    print(f"✓ {grid_path}")


if __name__ == "__main__":
    generate_fixtures(Path("fixtures"), explicit="--explicit" in sys.argv[1:])
