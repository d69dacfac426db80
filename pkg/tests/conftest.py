from pathlib import Path

import pytest

from mcpqe.chem.fcidump import read_fcidump
from mcpqe.engine.system import build_system

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "mcpqe" / "fixtures"

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.fcidump"


def all_fixture_names() -> list[str]:
    return sorted(f"{p.parent.name}/{p.stem}" for p in FIXTURES.glob("*/*.fcidump"))


@pytest.fixture(scope="session")
def systems():
    """Lazily built, session-cached systems keyed by ``name`` or ``(name, frozen_core)``."""
    cache = {}

    def get(name: str, frozen_core: int = 0):
        key = (name, frozen_core)
        if key not in cache:
            cache[key] = build_system(read_fcidump(fixture_path(name)), frozen_core, name=name)
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
