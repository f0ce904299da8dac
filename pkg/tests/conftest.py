import os
import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from vixify.consensus import ConsensusConfig, DifficultyState, GenesisConfig, mine_block
from vixify.crypto import vdf_setup, vrf_keygen

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def keys():
    return [vrf_keygen(bytes([i]) * 32) for i in range(4)]


@pytest.fixture(scope="session")
def small_params():
    return vdf_setup(64, b"tests")


@pytest.fixture(scope="session")
def small_config():
    return ConsensusConfig(q0=Fraction(50), r0=Fraction(3, 2), q_min=1)


@pytest.fixture(scope="session")
def genesis(keys, small_config, small_params):
    allocs = tuple((k.public_key, amount) for k, amount in zip(keys, (50, 30, 20, 0)))
    return GenesisConfig(allocs, small_config, small_params, timestamp_ms=1_000_000)


@pytest.fixture(scope="session")
def first_block(keys, genesis):
    ledger = genesis.ledger()
    diff = DifficultyState.initial(genesis.consensus)
    return mine_block(
        keys[0], ledger, genesis.block(), diff, (), genesis.consensus, genesis.vdf,
        timestamp=1_010_000,
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
