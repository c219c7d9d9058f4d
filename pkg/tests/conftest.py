import os

import pytest

from isoas import config
from isoas.sets import compute_isoas, compute_moas

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

EXAMPLES = ("example1", "example2", "example3")


def config_path(name):
    return os.path.join(CONFIG_DIR, name + ".json")


@pytest.fixture(scope="session")
def problems():
    """name -> (plant, loop, outc, opts) for the three bundled examples."""
    return {name: config.load_problem(config_path(name)) for name in EXAMPLES}


@pytest.fixture(scope="session")
def iso_results(problems):
    out = {}
    for name, (_, loop, outc, opts) in problems.items():
        out[name] = compute_isoas(loop, outc, opts)
    return out


@pytest.fixture(scope="session")
def moas_results(problems):
    out = {}
    for name, (_, loop, outc, opts) in problems.items():
        out[name] = compute_moas(loop, outc, opts)
    return out
