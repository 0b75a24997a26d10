import numpy as np
import pytest

from bil.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def grid3():
    return Grid(3, 32, 1.0)


@pytest.fixture(scope="session")
def grid3_64():
    return Grid(3, 64, 1.0)


@pytest.fixture(scope="session")
def grid2():
    return Grid(2, 64, 1.0)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one ``CRITERION n: PASS|FAIL`` line; also printed in the terminal summary."""
    lines = request.config._acceptance_lines

    def report(n, ok, detail=""):
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}" + (f" | {detail}" if detail else "")
        print(line)
        lines.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
