import pytest

from numerics_core import DEFAULT_PRECISION_BITS, working_precision


@pytest.fixture(scope="session", autouse=True)
def default_precision():
    with working_precision(DEFAULT_PRECISION_BITS):
        yield
