from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import pytest

from trichotomy_lab.base import LabSettings
from trichotomy_lab.genlab.fixtures import (
    dichotomy_spec,
    e1_rotated_spec,
    e1_spec,
    e2_embedded_spec,
    e2_spec,
    materialize,
)
from trichotomy_lab.genlab.generators import Triple


@pytest.fixture
def settings() -> LabSettings:
    return LabSettings(threads=2)


@pytest.fixture
def e1() -> Triple:
    return materialize(e1_spec(10))


@pytest.fixture
def e1_u() -> Triple:
    return materialize(e1_rotated_spec(10))


@pytest.fixture
def e1_dichotomy() -> Triple:
    return materialize(dichotomy_spec(10))


@pytest.fixture
def e2() -> Triple:
    return materialize(e2_spec(40))


@pytest.fixture
def e2_embedded() -> Triple:
    return materialize(e2_embedded_spec(40))


@pytest.fixture
def write_doc(tmp_path: Path) -> Callable[[str, dict[str, Any]], Path]:
    """Write a JSON document into the test's temporary directory."""

    def write(name: str, content: dict[str, Any]) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(content))
        return path

    return write
