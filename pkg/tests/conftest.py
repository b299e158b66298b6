import functools
import time

import pytest

from trimer import ModelParams, solve_below, solve_gap, GapWindow

ACCEPTANCE_LINES = []


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def below_states(gamma, lam=60.0):
    return timed(solve_below, ModelParams(gamma, lam))


@functools.lru_cache(maxsize=None)
def gap_states(gamma, lam=200.0):
    return timed(solve_gap, ModelParams(gamma, lam), GapWindow())


@pytest.fixture(scope="session")
def cached():
    return {"below": below_states, "gap": gap_states}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
