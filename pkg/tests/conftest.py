import numpy as np
import pytest

from invsq_nls.groundstate import solve_ground_state


@pytest.fixture(scope="session")
def gs14():
    return solve_ground_state(1.0, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian_mode(grid, s=1.0):
    """r^nu exp(-r^2 / (2 s^2)), the lowest Gaussian in the order-nu sector."""
    r = grid.nodes
    return r**grid.nu * np.exp(-r**2 / (2 * s * s))


def free_gaussian(r, nu, t, s=1.0):
    """Exact solution of i u_t = -u'' - u'/r + nu^2 u / r^2 from r^nu exp(-r^2/2s^2)."""
    z = 1.0 + 2j * t / s**2
    return r**nu * z ** (-(nu + 1)) * np.exp(-r**2 / (2 * s**2 * z))


ACCEPTANCE_LINES: dict[str, str] = {}


def report(criterion: str, passed: bool, detail: str) -> None:
    """Record the one-line verdict of an acceptance criterion (printed in the summary)."""
    line = f"{criterion} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
