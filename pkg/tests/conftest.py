import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


def central_diff(f, x, h):
    """Central differences of scalar ``f`` at every entry of array ``x`` (in place, restored)."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        step = h * max(1.0, abs(old))
        x[idx] = old + step
        a = f()
        x[idx] = old - step
        b = f()
        x[idx] = old
        g[idx] = (a - b) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """``report(n, ok, text)`` prints one pass/fail line per acceptance criterion."""

    def emit(n, ok, text):
        line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {text}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
