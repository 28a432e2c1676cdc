import numpy as np
import pytest

from fraudbench.data import N_FEATURES, Dataset, generate_synthetic

# outcome per acceptance criterion, filled by test_acceptance and printed at the end
ACCEPTANCE = {}


def make_dataset(features, label, amount=None, time=None):
    features = np.asarray(features, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    n = features.shape[0]
    full = np.zeros((n, N_FEATURES))
    full[:, : features.shape[1]] = features
    amount = np.full(n, 10.0) if amount is None else np.asarray(amount, dtype=float)
    time = np.arange(n, dtype=float) if time is None else time
    return Dataset.from_arrays(full, time, amount, np.asarray(label, dtype=bool))


@pytest.fixture(scope="session")
def small_data():
    return generate_synthetic(5000, 0.02, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n = marker.args[0]
    ok = call.excinfo is None
    prev = ACCEPTANCE.get(n, True)
    ACCEPTANCE[n] = prev and ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ACCEPTANCE[n] else 'FAIL'}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
