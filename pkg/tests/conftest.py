import zlib

import numpy as np
import pytest

from reflex.kinematics import load_model

_CRITERIA: dict = {}


@pytest.fixture(scope="session")
def model():
    return load_model()


@pytest.fixture
def rng(request):
    # one independent stream per test, keyed by its name
    return np.random.default_rng(zlib.crc32(request.node.name.encode()))


@pytest.fixture(scope="session")
def criteria():
    """Acceptance tests record one verdict line each; they are printed at the end of the run."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[key])
