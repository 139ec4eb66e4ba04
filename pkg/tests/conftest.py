import pytest

from cartocloud.scenario import default_scenario


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()
