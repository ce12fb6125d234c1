"""
Shared fixtures.
"""

import numpy as np
import pytest

from coreapp.graph_core import Dag
from tests.oracles import linear_data
from utils.config import Config


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """Keep logs and results of every test under its tmp_path."""
    monkeypatch.setattr(Config, 'LOG_FILE', str(tmp_path / 'logs' / 'test.log'))
    monkeypatch.setattr(Config, 'OUTPUT_DIR', str(tmp_path / 'results'))
    return tmp_path


@pytest.fixture
def chain():
    return Dag(3, [(0, 1), (1, 2)])


@pytest.fixture
def collider():
    return Dag(3, [(0, 1), (2, 1)])


@pytest.fixture
def fork():
    return Dag(3, [(1, 0), (1, 2)])


@pytest.fixture
def diamond():
    """0 -> 1 -> 3 <- 2 <- 0."""
    return Dag(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


@pytest.fixture
def chain_data(chain):
    return linear_data(chain, {(0, 1): 0.9, (1, 2): 0.9}, 100_000, seed=1)


@pytest.fixture
def collider_data(collider):
    return linear_data(collider, {(0, 1): 0.9, (2, 1): 0.9}, 100_000, seed=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
