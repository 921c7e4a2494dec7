import numpy as np
import pytest

from probevolume.speed_model import (
    SpeedComponent,
    SpeedDistribution,
    load_distribution,
)

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def park():
    return load_distribution("park-i35")


@pytest.fixture(scope="session")
def m60():
    return load_distribution("table2-60mph")


@pytest.fixture(scope="session")
def m30():
    return load_distribution("table2-30mph")


@pytest.fixture(scope="session")
def narrow20():
    """Near-point-mass at 20 m/s."""
    return SpeedDistribution((SpeedComponent(20.0, 1e-6, 1.0),), 0.0, 40.0)


def random_mixture(rng: np.random.Generator) -> SpeedDistribution:
    """A valid random mixture for property sweeps."""
    k = int(rng.integers(1, 5))
    lower = float(rng.uniform(0.0, 5.0))
    upper = lower + float(rng.uniform(10.0, 50.0))
    means = rng.uniform(lower - 5.0, upper + 5.0, size=k)
    sds = rng.uniform(0.5, 8.0, size=k)
    weights = rng.dirichlet(np.ones(k))
    comps = tuple(
        SpeedComponent(float(mu), float(sd), float(w))
        for mu, sd, w in zip(means, sds, weights)
    )
    return SpeedDistribution(comps, lower, upper)
