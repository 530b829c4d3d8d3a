import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gpp.verify import planted_generator

settings.register_profile("pkg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def planted_net():
    return planted_generator()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus_fit():
    """The default decoder run: 64 synthetic patches, 2000 epochs (about 30 s)."""
    from gpp.trainer import fit_autoencoder, synthetic_dataset
    ds = synthetic_dataset(64, 16, 0)
    return ds, fit_autoencoder(ds, 64, 2000, 5e-3, 0)


def window_ratios(losses, width=10):
    """Mean loss of each width-epoch window divided by the previous window's mean."""
    L = np.asarray(losses)
    w = L[:len(L) // width * width].reshape(-1, width).mean(axis=1)
    return w[1:] / w[:-1]


ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""
    def _report(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
