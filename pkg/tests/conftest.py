import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def brute_nearest(points, queries):
    """Lowest-index Euclidean nearest neighbour by full scan."""
    d = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=2)
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(queries)), idx]


ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(key, ok, detail)``."""

    def add(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"{key} {'PASS' if ok else 'FAIL'} {detail}")

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
