"""Shipped ``.sir`` programs used by the CLI, the MCP tools and the tests.

Example usage:
    from safeir.fixtures import load_fixture

    module = load_fixture("loop_cast")
"""

from importlib import resources

from ..constants import SIR_SUFFIX
from ..ir.module import ProgramModule
from ..parsers import parse_module

FIXTURE_NAMES: tuple[str, ...] = ("loop_cast", "dangling_cast", "stack_return")


def fixture_text(name: str) -> str:
    """Source text of a shipped fixture.

    Raises:
        KeyError: If ``name`` is not a shipped fixture.
    """
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture '{name}' (expected one of {', '.join(FIXTURE_NAMES)})")
    return resources.files(__name__).joinpath(f"{name}{SIR_SUFFIX}").read_text(encoding="utf-8")


def load_fixture(name: str) -> ProgramModule:
    return parse_module(fixture_text(name), filename=f"{name}{SIR_SUFFIX}")
