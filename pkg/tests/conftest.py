import numpy as np
import pytest

from fblris.model import SystemConfig, generate_channels, generate_topology


def small_config(**overrides):
    base = dict(n_aps=2, antennas_per_ap=4, n_users=3, n_ris_elements=16, area_half_extent_m=100.0)
    base.update(overrides)
    return SystemConfig(**base)


def draw(config, seed=0):
    rng = np.random.default_rng(seed)
    topology = generate_topology(config, rng)
    return topology, generate_channels(topology, config, rng)


@pytest.fixture
def small():
    config = small_config()
    _, channels = draw(config, 1)
    return config, channels


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
