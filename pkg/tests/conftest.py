import numpy as np
import pytest

from lossycorr.fields import GrfSpec, constant_field, generate_grf, white_noise


@pytest.fixture(scope="session")
def grf64():
    return generate_grf(GrfSpec.single(8, nx=64, ny=64, seed=1))


@pytest.fixture(scope="session")
def small_fields():
    """A handful of small, varied fields for codec round trips."""
    return [
        generate_grf(GrfSpec.single(2, nx=48, ny=40, seed=3)),
        generate_grf(GrfSpec.single(16, nx=37, ny=53, seed=4)),
        white_noise(33, 29, seed=5),
        constant_field(20, 20, 3.25),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
