import os

import pytest
from hypothesis import HealthCheck, settings

from hornlab import curvature, decay, harmonic, profiles

os.environ.setdefault("HORNLAB_THREADS", "1")

settings.register_profile("hornlab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("hornlab")

# acceptance lines collected by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def positive_metric():
    return curvature.horn_metric(profiles.preset("positive-k"))


@pytest.fixture(scope="session")
def nonpositive_metric():
    return curvature.horn_metric(profiles.preset("nonpositive-k"))


@pytest.fixture(scope="session")
def horn_field(positive_metric):
    s = decay.default_ball_radius(positive_metric)
    return harmonic.dirichlet_solve(positive_metric, s, {1: {0: 1.0}}, r_start=1e-15 * s)


@pytest.fixture(scope="session")
def horn_report(horn_field):
    return decay.decay_report(horn_field)


@pytest.fixture(scope="session")
def flat_field():
    return harmonic.dirichlet_solve(curvature.flat_metric(), 1.0, {1: {0: 1.0}})
