import numpy as np
import pytest

from ifstbc.designs import BUILTIN_DESIGNS, make_design


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=BUILTIN_DESIGNS)
def design(request):
    return make_design(request.param)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
