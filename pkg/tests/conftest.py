import numpy as np
import pytest

from scchain.cc_builder import build_cc_regular
from scchain.lifting import lift
from scchain.protographs import build_regular_chain, build_sc_arja, build_sc_ra


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte-Carlo or density-evolution runs")


@pytest.fixture(scope="session")
def small_codes():
    """Five small lifted codes covering every component family and a CC structure."""
    return {
        "regular": lift(build_regular_chain(3, 6, 6), 8, seed=1),
        "ra": lift(build_sc_ra(4, 6), 6, seed=2),
        "arja": lift(build_sc_arja(5), 6, seed=3),
        "cc_regular": lift(build_cc_regular(8, 2), 4, seed=4),
        "ra_modified": lift(build_sc_ra(6, 8, modified=True), 5, seed=5),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
