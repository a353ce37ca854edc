import numpy as np
import pytest

from ermc.spectral import default_temp_grid, grey_model, planck_bands


@pytest.fixture(scope="session")
def grey1():
    """kappa = 1 grey model covering 400-1600 K."""
    return grey_model(1.0, planck_bands(1600.0, 400), default_temp_grid(400.0, 1600.0, 25.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line; all lines are echoed in the terminal summary."""
    def _report(label, passed, detail):
        line = f"{label} {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
