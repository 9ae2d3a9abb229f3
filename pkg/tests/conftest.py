import numpy as np
import pytest

from mgate import metrics, model

ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def published_params():
    return model.transient_gate_params()


@pytest.fixture(scope="session")
def published_series(published_params):
    """Metrics on the figure grid: 400 samples over [0, 1.2/gamma]."""
    gamma = model.RB_D2_GAMMA
    return metrics.compute_metrics(published_params, np.linspace(0, 1.2 / gamma, 400))
