"""Shared fixtures: the shipped example modules and the generated corpus."""

import pytest

from safeir.fixtures import load_fixture
from safeir.harness import gen_corpus


@pytest.fixture
def loop_cast():
    """Loop microbenchmark: one cast, five safe dereferences."""
    return load_fixture("loop_cast")


@pytest.fixture
def dangling_cast():
    """Object freed by C before the cast."""
    return load_fixture("dangling_cast")


@pytest.fixture
def stack_return():
    """Safe reference to a dead stack slot returned from a function."""
    return load_fixture("stack_return")


@pytest.fixture(scope="session")
def corpus():
    """The full generated corpus; generation is deterministic, so one copy is shared."""
    return gen_corpus()
