import numpy as np
import pytest

from salasso.model import LinearDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n=40, p=60, k=5, sigma=0.5):
    X = rng.standard_normal((n, p)) / np.sqrt(n)
    beta = np.zeros(p)
    beta[rng.choice(p, k, replace=False)] = rng.normal(0, 3, k)
    y = X @ beta + sigma * rng.standard_normal(n)
    return LinearDataset(y, X, beta)


_ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def _record(number, title, passed, detail):
        label = str(number)
        line = f"criterion {label:<4} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[(int(label.rstrip("abcd")), label)] = line
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
