import numpy as np
import pytest

from magkey.config import SimScenario, default_env, default_scenario
from magkey.evaluate import build_sim_fingerprint
from magkey.keymap import calculator_layout

FACTORY_SEED = 101


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def factory(scenario):
    """(fingerprint, silence stats) for the default scenario, built once."""
    return build_sim_fingerprint(scenario, seed=FACTORY_SEED)


@pytest.fixture(scope="session")
def factory_fp(factory):
    return factory[0]


@pytest.fixture(scope="session")
def factory_silence(factory):
    return factory[1]


@pytest.fixture(scope="session")
def calc_layout(scenario):
    return calculator_layout(scenario.board.shape, origin_col=4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def make_scenario(noise_sigma=0.5, magnet=None, board=None):
    base = default_scenario()
    return SimScenario(board or base.board, default_env(noise_sigma),
                       magnet or base.magnet)
