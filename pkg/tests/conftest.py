import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

# lets test modules import the oracle helpers as a plain module
sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance summary")
        for line in results:
            terminalreporter.write_line(line)
