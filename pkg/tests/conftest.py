import numpy as np
import pytest

from mixtask.scenarios import builtin_scenario


@pytest.fixture(scope="session")
def pour_package():
    return builtin_scenario("pour_package")


@pytest.fixture(scope="session")
def toy_car():
    return builtin_scenario("toy_car")


@pytest.fixture(scope="session")
def gift_box():
    return builtin_scenario("gift_box")


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
