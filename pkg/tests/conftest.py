import numpy as np
import pytest

from twomodejc import magnus
from twomodejc.model import InitialState, ModelParams

G2_OPT = magnus.optimal_g2(0.02, 4.0)
T_COH = magnus.coherence_time(0.02)


@pytest.fixture
def fig2_params():
    return ModelParams(0.98, 0.25, 1.0, 0.01, G2_OPT)


@pytest.fixture
def fig6_params():
    # the printed 0.00196 rather than the closed form, as in the fidelity figure
    return ModelParams(0.98, 0.25, 1.0, 0.01, 0.00196)


@pytest.fixture
def excited44():
    return InitialState.excited(4.0, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = mod.RESULTS[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
