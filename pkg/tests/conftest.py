import time

import numpy as np
import pytest


def random_point(rng, n, c, spread=2.0):
    logits = spread * rng.standard_normal((n, c))
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def random_tangent(rng, n, c):
    q = rng.standard_normal((n, c))
    return q - q.mean(axis=-1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_RESULTS = pytest.StashKey()


class _Criterion:
    def __init__(self, results, label):
        self.results, self.label, self.detail = results, label, ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, kind, value, tb):
        if kind is None:
            status = "PASS"
        elif issubclass(kind, pytest.skip.Exception):
            status = "SKIP"
        else:
            status = "FAIL"
        elapsed = time.perf_counter() - self.start
        line = f"criterion {self.label}: {status} [{elapsed:.1f}s] {self.detail}".rstrip()
        print(line)
        self.results.append(line)
        return False


@pytest.fixture
def criterion(request):
    """Context manager factory that records one pass/fail line per acceptance criterion."""
    results = request.config.stash.setdefault(_RESULTS, [])
    return lambda label: _Criterion(results, label)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
