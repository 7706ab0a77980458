import numpy as np
import pytest

from kahm.federation import build_global_model
from kahm.synthetic import make_blobs

ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, passed: bool | None, detail: str = "") -> None:
    """Record one acceptance line; ``passed=None`` means the check could not run."""
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {status}  {detail}".rstrip())
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blobs():
    return make_blobs(100, seed=0)


@pytest.fixture(scope="session")
def blobs_two_clients():
    return make_blobs(100, seed=0, n_clients=2)


@pytest.fixture(scope="session")
def blob_model(blobs):
    return build_global_model(blobs, seed=0)


@pytest.fixture(scope="session")
def blob_model_two_clients(blobs_two_clients):
    return build_global_model(blobs_two_clients, seed=0)
