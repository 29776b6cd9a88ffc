import numpy as np
import pytest

from tpclab.bch import ehamming_8_4, make_bch_spec
from tpclab.channel import ProductCodeSpec

from acceptance_log import LINES


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_code():
    return ehamming_8_4()


@pytest.fixture(scope="session")
def mid_code():
    return make_bch_spec(4, 1)


@pytest.fixture(scope="session")
def toy_product(toy_code):
    return ProductCodeSpec(toy_code, toy_code)


@pytest.fixture()
def rng():
    return np.random.default_rng(0xC0DEC)
