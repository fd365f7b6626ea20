import pytest

from loopwm.microworld import load_domain


@pytest.fixture(scope="session")
def kitchen():
    return load_domain("kitchen")


@pytest.fixture(scope="session")
def workshop():
    return load_domain("workshop")
