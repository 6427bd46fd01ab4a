import numpy as np
import pytest

from dlmac.neuralkit import build_model, dense_arch
from dlmac.spectrum import ProcessedTrace


def fixed_choice_model(mcs, norm=(-100.0, -30.0)):
    """Access/rate model whose output is always ``mcs`` (-1 means never transmit)."""
    m = build_model(dense_arch(360, 10, hidden=(2,)), (3, 120), range(-1, 9), task="jcara",
                    norm=norm)
    for p in m.params:
        for v in p.values():
            v[...] = 0.0
    m.params[-1]["b"][mcs + 1] = 1.0
    return m


def fixed_switch_model(channel, channels=(1, 6, 11), norm=(-20.0, 60.0)):
    m = build_model(dense_arch(5 * len(channels), len(channels), hidden=(2,)),
                    (5 * len(channels),), channels, task="switch", norm=norm)
    for p in m.params:
        for v in p.values():
            v[...] = 0.0
    m.params[-1]["b"][list(channels).index(channel)] = 1.0
    return m


def bursty_trace(n, seed=0, channels=(6,), period=300, duty=0.4):
    """Square-wave interference over a noisy floor, one phase per channel."""
    rng = np.random.default_rng(seed)
    cols = []
    for j, _ in enumerate(channels):
        on = ((np.arange(n) + 97 * j) % period) < duty * period
        cols.append(np.where(on, -58.0, -90.0) + rng.normal(0, 2.0, n))
    return ProcessedTrace(np.column_stack(cols), tuple(channels))


@pytest.fixture
def fixed_model():
    return fixed_choice_model


@pytest.fixture
def trace_factory():
    return bursty_trace


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def criterion(request):
    """Record one pass/fail line per acceptance criterion and return the verdict."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail}"
        lines.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
