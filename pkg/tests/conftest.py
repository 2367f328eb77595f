import numpy as np
import pytest

from phil_forge.circuits import PhilScenario
from phil_forge.lti import StateSpace
from phil_forge.plant import assemble_plant
from phil_forge.synthesis import synthesize


def random_stable(rng, n, m, p, dt=None, radius=0.9):
    """Random stable model; discrete poles inside ``radius``, continuous in Re < -0.1."""
    A = rng.standard_normal((n, n))
    if dt is None:
        A = A - (np.max(np.linalg.eigvals(A).real) + 0.1 + rng.random()) * np.eye(n)
    else:
        A = A * radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                      rng.standard_normal((p, m)), dt)


@pytest.fixture(scope="session")
def scenario():
    return PhilScenario()


@pytest.fixture(scope="session")
def default_plant(scenario):
    return assemble_plant(scenario)


@pytest.fixture(scope="session")
def default_controller(default_plant):
    return synthesize(default_plant)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
