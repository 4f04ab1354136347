import pytest

from lambdabound.instance import bundled_text, load_instance
from lambdabound.validator import load_solution


@pytest.fixture(scope="session")
def net4():
    return load_instance(bundled_text("net4.json"))


@pytest.fixture(scope="session")
def net4_solution(net4):
    return load_solution(bundled_text("net4.solution.json"), net4)
