import itertools

import numpy as np
import pytest

# Worked example: two 10-d float rows and their published {5,10} vertex codes.
# V2_PUBLISHED[8] is -1 although U2[8] = +0.4; the sign rule gives +1 there.
U1 = [0.32, 0.4, -0.38, -0.19, 0.29, 0.45, 0.44, -0.16, 0.23, -0.02]
U2 = [-0.16, -0.4, 0.38, 0.45, 0.14, 0.19, -0.38, -0.04, 0.4, -0.35]
V1 = [1, 1, -1, 0, 0, 1, 1, 0, 0, 0]
V2_PUBLISHED = [0, -1, 1, 1, 0, 0, -1, 0, -1, 0]
V1_PLUS = [1, 1, 0, 0, 0, 1, 1, 0, 0, 0]
V1_MINUS = [0, 0, 1, 0, 0, 0, 0, 0, 0, 0]
V2_PLUS = [0, 0, 1, 1, 0, 0, 0, 0, 0, 0]
V2_MINUS = [0, 1, 0, 0, 0, 0, 1, 0, 1, 0]


def all_vertices(d, x):
    """Every ternary vector of length d with exactly x nonzeros."""
    for support in itertools.combinations(range(d), x):
        for signs in itertools.product((-1, 1), repeat=x):
            v = np.zeros(d, dtype=np.int64)
            v[list(support)] = signs
            yield v


def random_ternary(rng, n, d, density=None):
    if density is None:
        return rng.integers(-1, 2, size=(n, d)).astype(np.int8)
    nz = rng.random((n, d)) < density
    return (nz * rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, d))).astype(np.int8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, summarised at the end of the run")


def pytest_runtest_logreport(report):
    label = _ACCEPTANCE.get(report.nodeid)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[report.nodeid] = (label[0], report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _ACCEPTANCE[item.nodeid] = (m.args[0], None)


def pytest_terminal_summary(terminalreporter):
    rows = [v for v in _ACCEPTANCE.values() if v[1] is not None]
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in sorted(rows, key=lambda r: int(r[0].split()[0])):
        verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{verdict}  {label}")
