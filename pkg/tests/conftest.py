import numpy as np
import pytest

from tabsim import config as config_mod

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    """Fast configuration for wiring tests."""
    return config_mod.apply_overrides(config_mod.RunConfig(), {
        "network.L": 12,
        "experiment.trials": 2,
        "experiment.c_train": 40,
        "experiment.c_test": 50,
        "experiment.hidden_counts": (5, 10),
        "experiment.bit_list": (4, 13),
        "experiment.pool": 30,
        "experiment.subset": 8,
        "experiment.n_subsets": 5,
    })
